//! Search drivers for top-list recommendation: a similarity-ranked baseline
//! plus seven multi-objective optimizers that trade accuracy against
//! diversity over fixed-size sublists of a user's candidate set.
//!
//! All drivers are deterministic given (context, config, seed): every random
//! choice flows through the caller's RNG and no data structure with
//! unordered iteration ever picks a list.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{EvalContext, Evaluator, ObjectiveVector, RecList};
use crate::operators::{
    clone_proportional, crossover, mutate, nlists, AnnealState, OpCounters,
};
use crate::pareto::{crowding_distance, nondominated_sort, ParetoArchive};
use crate::ratings::ItemId;
use crate::rng::rng_from_seed;

/// The eight selectable search strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Single-objective baseline: the top-s candidates by predicted rating.
    Icf,
    /// Elitist genetic search with non-dominated sorting and crowding.
    Nsga2,
    /// Archived simulated annealing around a fixed reference list.
    Amosa,
    /// Immune-inspired search: proportional cloning of the most isolated
    /// non-dominated lists.
    Nnia,
    /// Genetic search with an annealing pass over each generation's front.
    HanV1,
    /// Annealing on a warm-started archive feeding a genetic population.
    HanV2,
    /// Immune search with an annealing pass over each generation's front.
    HaniV1,
    /// Annealing on a warm-started archive feeding an immune population.
    HaniV2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Icf,
        Algorithm::Nsga2,
        Algorithm::Amosa,
        Algorithm::Nnia,
        Algorithm::HanV1,
        Algorithm::HanV2,
        Algorithm::HaniV1,
        Algorithm::HaniV2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Icf => "icf",
            Algorithm::Nsga2 => "nsga2",
            Algorithm::Amosa => "amosa",
            Algorithm::Nnia => "nnia",
            Algorithm::HanV1 => "hanv1",
            Algorithm::HanV2 => "hanv2",
            Algorithm::HaniV1 => "haniv1",
            Algorithm::HaniV2 => "haniv2",
        }
    }

    /// Everything except the rating-ranked baseline searches a frontier.
    pub fn is_multi_objective(self) -> bool {
        self != Algorithm::Icf
    }

    /// Whether the driver consumes a warm-started archive.
    pub fn needs_init_archive(self) -> bool {
        matches!(self, Algorithm::Amosa | Algorithm::HanV2 | Algorithm::HaniV2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icf" => Ok(Algorithm::Icf),
            "nsga2" => Ok(Algorithm::Nsga2),
            "amosa" => Ok(Algorithm::Amosa),
            "nnia" => Ok(Algorithm::Nnia),
            "hanv1" => Ok(Algorithm::HanV1),
            "hanv2" => Ok(Algorithm::HanV2),
            "haniv1" => Ok(Algorithm::HaniV1),
            "haniv2" => Ok(Algorithm::HaniV2),
            other => Err(Error::BadConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Shared knob set for every driver. Fields a driver does not use are
/// ignored by it; [`AlgoConfig::default`] carries the reference values used
/// throughout the experiment harness.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoConfig {
    /// Search iterations (generations or annealing rounds).
    pub max_iter: usize,
    /// Genetic population size.
    pub pop_size: usize,
    /// Crossover rate.
    pub pc: f64,
    /// Mutation rate for the genetic drivers.
    pub pm: f64,
    /// Archive size that triggers clustering-based thinning.
    pub soft_limit: usize,
    /// Archive size thinning reduces to; also the population cap of the
    /// annealing-hybrid genetic drivers.
    pub hard_limit: usize,
    /// Initial annealing temperature.
    pub tau0: f64,
    /// Temperature decay factor per round.
    pub alpha: f64,
    /// Max kept non-dominated lists in the immune drivers.
    pub nd: usize,
    /// Active (most isolated) lists cloned each immune generation.
    pub na: usize,
    /// Total clones per immune generation.
    pub nc: usize,
    /// Mutation rate for the immune drivers.
    pub pm_nnia: f64,
    /// Iterations of the warm-start run that seeds annealing archives.
    pub init_archive_iters: usize,
    /// Divide tau by alpha each round instead of multiplying, for probing
    /// the opposite temperature schedule. Off by default.
    pub inverse_tau_schedule: bool,
    /// Record per-iteration frontier statistics.
    pub collect_trace: bool,
    /// Keep the full evaluation log (every distinct list scored) on the
    /// result. Meant for small searches; the log grows with the budget.
    pub keep_eval_log: bool,
    /// Master seed consumed by [`run_algorithm`].
    pub seed: u64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            max_iter: 200,
            pop_size: 100,
            pc: 0.7,
            pm: 0.2,
            soft_limit: 140,
            hard_limit: 100,
            tau0: 1.0,
            alpha: 0.9,
            nd: 100,
            na: 10,
            nc: 40,
            pm_nnia: 0.1,
            init_archive_iters: 50,
            inverse_tau_schedule: false,
            collect_trace: false,
            keep_eval_log: false,
            seed: 0,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: String) -> Result<()> {
            Err(Error::BadConfig(msg))
        }
        if self.pop_size == 0 {
            return bad("pop_size must be at least 1".into());
        }
        for (name, rate) in [("pc", self.pc), ("pm", self.pm), ("pm_nnia", self.pm_nnia)] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} = {rate} must lie in [0, 1]"));
            }
        }
        if self.hard_limit == 0 || self.hard_limit > self.soft_limit {
            return bad(format!(
                "archive limits must satisfy 1 <= hard ({}) <= soft ({})",
                self.hard_limit, self.soft_limit
            ));
        }
        if !(self.tau0 > 0.0) {
            return bad(format!("tau0 = {} must be positive", self.tau0));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if self.nd == 0 {
            return bad("nd must be at least 1".into());
        }
        if self.na == 0 || self.na > self.nd {
            return bad(format!("na ({}) must lie in 1..=nd ({})", self.na, self.nd));
        }
        if self.nc == 0 {
            return bad("nc must be at least 1".into());
        }
        Ok(())
    }

    fn step_tau(&self, state: &mut AnnealState) {
        if self.inverse_tau_schedule {
            state.grow_tau();
        } else {
            state.decay_tau();
        }
    }
}

/// Frontier statistics sampled at the end of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationStat {
    pub iteration: usize,
    pub frontier_size: usize,
    pub best_accuracy: f64,
    pub best_diversity: f64,
}

/// Outcome of one driver run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    /// Final non-dominated set. Never empty on success.
    pub frontier: ParetoArchive,
    /// Fresh objective computations performed (the evaluation budget).
    pub evaluations: u64,
    pub wall_time: Duration,
    pub counters: OpCounters,
    pub trace: Option<Vec<IterationStat>>,
    /// Every distinct list scored, with its objectives, sorted by item set.
    /// Present when [`AlgoConfig::keep_eval_log`] is on.
    pub eval_log: Option<Vec<(Vec<ItemId>, ObjectiveVector)>>,
}

/// One frontier member in wire form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub f1: f64,
    pub f2: f64,
    pub items: Vec<u64>,
}

/// Serializable summary of a run, written per (user, algorithm) cell.
/// `items` hold external (raw) item ids; `wall_time_ms` is optional so
/// artifacts that must be byte-reproducible can omit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub user: u64,
    pub seed: u64,
    pub frontier: Vec<FrontierEntry>,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<u64>,
}

impl RunRecord {
    /// Flattens a result. `map_item` translates internal item ids to the
    /// external id space. Frontier rows are sorted by (f1, f2, items).
    pub fn new(
        result: &RunResult,
        user: u64,
        seed: u64,
        map_item: impl Fn(ItemId) -> u64,
        include_wall_time: bool,
    ) -> Self {
        let mut frontier: Vec<FrontierEntry> = result
            .frontier
            .members()
            .iter()
            .map(|m| {
                let o = cached(m);
                FrontierEntry {
                    f1: o.accuracy,
                    f2: o.diversity,
                    items: m.items().iter().map(|&i| map_item(i)).collect(),
                }
            })
            .collect();
        frontier.sort_by(|a, b| {
            a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)).then(a.items.cmp(&b.items))
        });
        RunRecord {
            algorithm: result.algorithm.name().to_string(),
            user,
            seed,
            frontier,
            evaluations: result.evaluations,
            wall_time_ms: include_wall_time.then(|| result.wall_time.as_millis() as u64),
        }
    }
}

fn cached(list: &RecList) -> ObjectiveVector {
    list.cached().expect("search lists carry cached objectives")
}

fn cached_objectives(lists: &[RecList]) -> Vec<ObjectiveVector> {
    lists.iter().map(cached).collect()
}

/// Half-even rounding for offspring counts, e.g. a 0.7 crossover rate on a
/// population of 100 yields 35 crossover operations.
fn round_count(x: f64) -> usize {
    x.round_ties_even() as usize
}

/// Uniformly random valid list: a size-s draw without replacement from the
/// candidate set, kept in draw order.
fn random_list<R: Rng + ?Sized>(ctx: &EvalContext, rng: &mut R) -> RecList {
    let picks = rand::seq::index::sample(rng, ctx.n_candidates(), ctx.list_size());
    let items: Vec<ItemId> = picks.iter().map(|i| ctx.candidates()[i]).collect();
    RecList::new(items, ctx).expect("sampled list is valid by construction")
}

/// Draws up to `size` random lists with pairwise distinct item sets, each
/// evaluated. Small candidate spaces can run out of distinct lists; the
/// draw budget is capped at ten attempts per requested list, so the
/// returned population may be smaller than asked (never empty).
fn initial_population<R: Rng + ?Sized>(
    ctx: &EvalContext,
    size: usize,
    eval: &mut Evaluator<'_>,
    rng: &mut R,
) -> Result<Vec<RecList>> {
    let mut pop = Vec::with_capacity(size);
    let mut seen: HashSet<Vec<ItemId>> = HashSet::with_capacity(size);
    let mut attempts = 0usize;
    let max_attempts = size.saturating_mul(10).max(1);
    while pop.len() < size && attempts < max_attempts {
        attempts += 1;
        let mut list = random_list(ctx, rng);
        if seen.insert(list.sorted_items()) {
            eval.evaluate(&mut list)?;
            pop.push(list);
        }
    }
    debug_assert!(!pop.is_empty());
    Ok(pop)
}

fn first_front_indices(pop: &[RecList]) -> Vec<usize> {
    if pop.is_empty() {
        return Vec::new();
    }
    let mut fronts = nondominated_sort(&cached_objectives(pop));
    fronts.swap_remove(0)
}

/// Clones the non-dominated subset, in population order.
fn first_front(pop: &[RecList]) -> Vec<RecList> {
    first_front_indices(pop).into_iter().map(|i| pop[i].clone()).collect()
}

/// Environmental selection: keeps `target` lists front by front; the front
/// that overflows is ordered by crowding distance (descending, ties by
/// front position) and cut there. Population order stays front-major.
fn truncate_by_fronts(pop: Vec<RecList>, target: usize) -> Vec<RecList> {
    if pop.len() <= target {
        return pop;
    }
    let objs = cached_objectives(&pop);
    let fronts = nondominated_sort(&objs);
    let mut keep: Vec<usize> = Vec::with_capacity(target);
    for front in fronts {
        if keep.len() + front.len() <= target {
            keep.extend(front);
            if keep.len() == target {
                break;
            }
        } else {
            let front_objs: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
            let dist = crowding_distance(&front_objs);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
            keep.extend(order.into_iter().take(target - keep.len()).map(|p| front[p]));
            break;
        }
    }
    let mut slots: Vec<Option<RecList>> = pop.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("kept indices are distinct")).collect()
}

/// Inserts the lists in order into a fresh archive with the given limits.
fn archive_from_lists(
    lists: Vec<RecList>,
    soft_limit: usize,
    hard_limit: usize,
) -> ParetoArchive {
    let mut arc = ParetoArchive::new(soft_limit, hard_limit);
    for list in lists {
        arc.insert(list);
    }
    arc
}

/// Copies an archive's members into one with different size limits.
fn reframe_archive(src: &ParetoArchive, soft_limit: usize, hard_limit: usize) -> ParetoArchive {
    archive_from_lists(src.members().to_vec(), soft_limit, hard_limit)
}

/// One generation of genetic variation. Performs
/// `round_count(base * pc / 2)` crossovers over uniformly drawn parent
/// pairs (children evaluated on creation), then `round_count(base * pm)`
/// mutation picks over the crossover children. No crossover children means
/// no mutants. `base` is the driver's nominal population size.
fn genetic_offspring<R: Rng + ?Sized>(
    pop: &[RecList],
    base: usize,
    pc: f64,
    pm: f64,
    eval: &mut Evaluator<'_>,
    rng: &mut R,
    counters: &mut OpCounters,
) -> Result<(Vec<RecList>, Vec<RecList>)> {
    let ctx = eval.ctx();
    let n_cross = round_count(base as f64 * pc / 2.0);
    let mut cross_children = Vec::with_capacity(2 * n_cross);
    for _ in 0..n_cross {
        let i = rng.gen_range(0..pop.len());
        let j = rng.gen_range(0..pop.len());
        let (mut c1, mut c2) = crossover(&pop[i], &pop[j], ctx, rng, counters);
        eval.evaluate(&mut c1)?;
        eval.evaluate(&mut c2)?;
        cross_children.push(c1);
        cross_children.push(c2);
    }
    let n_mut = round_count(base as f64 * pm);
    let mut mutants = Vec::with_capacity(n_mut);
    if !cross_children.is_empty() {
        for _ in 0..n_mut {
            let pick = rng.gen_range(0..cross_children.len());
            let mut m = mutate(&cross_children[pick], ctx, pm, rng, counters);
            eval.evaluate(&mut m)?;
            mutants.push(m);
        }
    }
    Ok((cross_children, mutants))
}

/// Immune selection: the non-dominated lists ordered by crowding distance
/// (descending, ties by front position), cut to `nd`; the first `na` of
/// those form the active set and keep their distances for cloning.
fn immune_select(pop: &[RecList], nd: usize, na: usize) -> (Vec<RecList>, Vec<(RecList, f64)>) {
    let front = first_front_indices(pop);
    let front_objs: Vec<ObjectiveVector> = front.iter().map(|&i| cached(&pop[i])).collect();
    let dist = crowding_distance(&front_objs);
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    order.truncate(nd);
    let dominant: Vec<RecList> = order.iter().map(|&p| pop[front[p]].clone()).collect();
    let active: Vec<(RecList, f64)> =
        order.iter().take(na).map(|&p| (pop[front[p]].clone(), dist[p])).collect();
    (dominant, active)
}

/// Immune variation: `nc` proportional clones, each crossed with a
/// uniformly drawn active list (two children per crossing), then one
/// mutation pass over every child. Only the final offspring are evaluated.
fn immune_offspring<R: Rng + ?Sized>(
    active: &[(RecList, f64)],
    nc: usize,
    pm: f64,
    eval: &mut Evaluator<'_>,
    rng: &mut R,
    counters: &mut OpCounters,
) -> Result<Vec<RecList>> {
    let ctx = eval.ctx();
    let clones = clone_proportional(active, nc);
    let mut children = Vec::with_capacity(2 * clones.len());
    for clone in &clones {
        let pick = rng.gen_range(0..active.len());
        let (c1, c2) = crossover(&active[pick].0, clone, ctx, rng, counters);
        children.push(c1);
        children.push(c2);
    }
    let mut offspring = Vec::with_capacity(children.len());
    for child in &children {
        let mut m = mutate(child, ctx, pm, rng, counters);
        eval.evaluate(&mut m)?;
        offspring.push(m);
    }
    Ok(offspring)
}

fn push_stat(
    trace: &mut Option<Vec<IterationStat>>,
    iteration: usize,
    objs: &[ObjectiveVector],
) {
    let Some(tr) = trace.as_mut() else { return };
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut best_diversity = f64::NEG_INFINITY;
    for o in objs {
        best_accuracy = best_accuracy.max(o.accuracy);
        best_diversity = best_diversity.max(o.diversity);
    }
    tr.push(IterationStat { iteration, frontier_size: objs.len(), best_accuracy, best_diversity });
}

fn trace_population(trace: &mut Option<Vec<IterationStat>>, iteration: usize, pop: &[RecList]) {
    if trace.is_none() {
        return;
    }
    let objs: Vec<ObjectiveVector> =
        first_front_indices(pop).into_iter().map(|i| cached(&pop[i])).collect();
    push_stat(trace, iteration, &objs);
}

fn trace_archive(trace: &mut Option<Vec<IterationStat>>, iteration: usize, arc: &ParetoArchive) {
    if trace.is_none() {
        return;
    }
    push_stat(trace, iteration, &arc.objectives());
}

fn finish(
    algorithm: Algorithm,
    frontier: ParetoArchive,
    eval: &Evaluator<'_>,
    counters: OpCounters,
    trace: Option<Vec<IterationStat>>,
    keep_log: bool,
    start: Instant,
) -> RunResult {
    debug_assert!(!frontier.is_empty(), "a finished run always has a frontier");
    RunResult {
        algorithm,
        frontier,
        evaluations: eval.fresh_evaluations(),
        wall_time: start.elapsed(),
        counters,
        trace,
        eval_log: keep_log.then(|| eval.log()),
    }
}

/// Baseline list: the first `s` candidates in ranked order, unscored.
pub fn run_icf(ctx: &EvalContext) -> Result<RecList> {
    RecList::new(ctx.candidates()[..ctx.list_size()].to_vec(), ctx)
}

/// Elitist genetic search. Each generation breeds crossover and mutation
/// offspring, merges them ahead of the parents, and truncates back to
/// `pop_size` by fronts; the final population's non-dominated subset is the
/// frontier.
pub fn run_nsga2<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut pop = initial_population(ctx, cfg.pop_size, &mut eval, rng)?;
    for iteration in 0..cfg.max_iter {
        let (cross, mutants) =
            genetic_offspring(&pop, cfg.pop_size, cfg.pc, cfg.pm, &mut eval, rng, &mut counters)?;
        let mut merged = cross;
        merged.extend(mutants);
        merged.extend(std::mem::take(&mut pop));
        pop = truncate_by_fronts(merged, cfg.pop_size);
        trace_population(&mut trace, iteration, &pop);
    }
    let frontier = archive_from_lists(first_front(&pop), cfg.soft_limit, cfg.hard_limit);
    Ok(finish(Algorithm::Nsga2, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Archived annealing. The reference list is drawn once from the
/// warm-started archive and every round perturbs around that same fixed
/// reference; acceptance decisions inside a round never leak into the
/// next. The archive is thinned to the hard limit at the end.
pub fn run_amosa<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
    init_arc: &ParetoArchive,
) -> Result<RunResult> {
    cfg.validate()?;
    if init_arc.is_empty() {
        return Err(Error::EmptyInitialArchive);
    }
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut archive = reframe_archive(init_arc, cfg.soft_limit, cfg.hard_limit);
    let fixed = archive.members()[rng.gen_range(0..archive.len())].clone();
    let mut state = AnnealState::new(cfg.tau0, cfg.alpha, fixed.clone());
    for iteration in 0..cfg.max_iter {
        state.current = fixed.clone();
        nlists(&mut state, &mut archive, &mut eval, rng, &mut counters)?;
        cfg.step_tau(&mut state);
        trace_archive(&mut trace, iteration, &archive);
    }
    archive.thin_to_hard_limit();
    Ok(finish(Algorithm::Amosa, archive, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Immune search. Each generation keeps the `nd` most isolated
/// non-dominated lists, clones the `na` most isolated proportionally to
/// crowding distance, crosses every clone with a random active list, and
/// mutates the children; offspring plus the kept lists form the next
/// population. The final kept set is the frontier.
pub fn run_nnia<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut pop = initial_population(ctx, cfg.nd, &mut eval, rng)?;
    for iteration in 0..cfg.max_iter {
        let (dominant, active) = immune_select(&pop, cfg.nd, cfg.na);
        let offspring =
            immune_offspring(&active, cfg.nc, cfg.pm_nnia, &mut eval, rng, &mut counters)?;
        pop = offspring;
        pop.extend(dominant);
        trace_population(&mut trace, iteration, &pop);
    }
    let (dominant, _) = immune_select(&pop, cfg.nd, cfg.na);
    let frontier = archive_from_lists(dominant, cfg.nd, cfg.nd);
    Ok(finish(Algorithm::Nnia, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Genetic search with an annealing pass per generation. After breeding
/// and merging, the merged population's front seeds a fresh archive and a
/// randomly drawn front member anneals against it; the archive's survivors
/// rejoin the population before truncation to the hard limit.
pub fn run_hanv1<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut pop = initial_population(ctx, cfg.hard_limit, &mut eval, rng)?;
    let mut tau = cfg.tau0;
    for iteration in 0..cfg.max_iter {
        let (cross, mutants) =
            genetic_offspring(&pop, cfg.hard_limit, cfg.pc, cfg.pm, &mut eval, rng, &mut counters)?;
        let mut merged = cross;
        merged.extend(mutants);
        merged.extend(std::mem::take(&mut pop));
        let front = first_front(&merged);
        let current = front[rng.gen_range(0..front.len())].clone();
        let mut archive = archive_from_lists(front, cfg.soft_limit, cfg.hard_limit);
        let mut state = AnnealState::new(tau, cfg.alpha, current);
        nlists(&mut state, &mut archive, &mut eval, rng, &mut counters)?;
        cfg.step_tau(&mut state);
        tau = state.tau;
        merged.extend(archive.members().iter().cloned());
        pop = truncate_by_fronts(merged, cfg.hard_limit);
        trace_population(&mut trace, iteration, &pop);
    }
    let frontier = archive_from_lists(first_front(&pop), cfg.soft_limit, cfg.hard_limit);
    Ok(finish(Algorithm::HanV1, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Genetic search fed by a persistent annealing archive. The reference
/// list is drawn once from the warm-started archive and stays fixed; each
/// iteration anneals a round into the archive, then breeds the population
/// and truncates the merge of offspring, parents, and archive members.
pub fn run_hanv2<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
    init_arc: &ParetoArchive,
) -> Result<RunResult> {
    cfg.validate()?;
    if init_arc.is_empty() {
        return Err(Error::EmptyInitialArchive);
    }
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut archive = reframe_archive(init_arc, cfg.soft_limit, cfg.hard_limit);
    let mut pop = initial_population(ctx, cfg.hard_limit, &mut eval, rng)?;
    let fixed = archive.members()[rng.gen_range(0..archive.len())].clone();
    let mut state = AnnealState::new(cfg.tau0, cfg.alpha, fixed.clone());
    for iteration in 0..cfg.max_iter {
        state.current = fixed.clone();
        nlists(&mut state, &mut archive, &mut eval, rng, &mut counters)?;
        cfg.step_tau(&mut state);
        let (cross, mutants) =
            genetic_offspring(&pop, cfg.hard_limit, cfg.pc, cfg.pm, &mut eval, rng, &mut counters)?;
        let mut merged = cross;
        merged.extend(mutants);
        merged.extend(std::mem::take(&mut pop));
        merged.extend(archive.members().iter().cloned());
        pop = truncate_by_fronts(merged, cfg.hard_limit);
        trace_population(&mut trace, iteration, &pop);
    }
    let frontier = archive_from_lists(first_front(&pop), cfg.soft_limit, cfg.hard_limit);
    Ok(finish(Algorithm::HanV2, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Immune search with an annealing pass per generation. After immune
/// variation, a random active list anneals against an archive seeded from
/// the pre-update population's front at constant temperature; offspring,
/// kept lists, and archive survivors form the next population. The final
/// kept set is the frontier.
pub fn run_haniv1<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut pop = initial_population(ctx, cfg.nd, &mut eval, rng)?;
    for iteration in 0..cfg.max_iter {
        let (dominant, active) = immune_select(&pop, cfg.nd, cfg.na);
        let offspring =
            immune_offspring(&active, cfg.nc, cfg.pm_nnia, &mut eval, rng, &mut counters)?;
        let current = active[rng.gen_range(0..active.len())].0.clone();
        let mut archive = archive_from_lists(first_front(&pop), cfg.soft_limit, cfg.hard_limit);
        let mut state = AnnealState::new(cfg.tau0, cfg.alpha, current);
        nlists(&mut state, &mut archive, &mut eval, rng, &mut counters)?;
        pop = offspring;
        pop.extend(dominant);
        pop.extend(archive.members().iter().cloned());
        trace_population(&mut trace, iteration, &pop);
    }
    let (dominant, _) = immune_select(&pop, cfg.nd, cfg.na);
    let frontier = archive_from_lists(dominant, cfg.nd, cfg.nd);
    Ok(finish(Algorithm::HaniV1, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Immune search fed by a persistent annealing archive. The reference list
/// is drawn once from the warm-started archive and stays fixed; each
/// iteration anneals a round into the archive, runs immune variation, and
/// rebuilds the population from offspring, kept lists, and archive
/// members. The final kept set is the frontier.
pub fn run_haniv2<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
    init_arc: &ParetoArchive,
) -> Result<RunResult> {
    cfg.validate()?;
    if init_arc.is_empty() {
        return Err(Error::EmptyInitialArchive);
    }
    let start = Instant::now();
    let mut eval = Evaluator::new(ctx);
    let mut counters = OpCounters::default();
    let mut trace = cfg.collect_trace.then(Vec::new);
    let mut archive = reframe_archive(init_arc, cfg.soft_limit, cfg.hard_limit);
    let mut pop = initial_population(ctx, cfg.nd, &mut eval, rng)?;
    let fixed = archive.members()[rng.gen_range(0..archive.len())].clone();
    let mut state = AnnealState::new(cfg.tau0, cfg.alpha, fixed.clone());
    for iteration in 0..cfg.max_iter {
        state.current = fixed.clone();
        nlists(&mut state, &mut archive, &mut eval, rng, &mut counters)?;
        cfg.step_tau(&mut state);
        let (dominant, active) = immune_select(&pop, cfg.nd, cfg.na);
        let offspring =
            immune_offspring(&active, cfg.nc, cfg.pm_nnia, &mut eval, rng, &mut counters)?;
        pop = offspring;
        pop.extend(dominant);
        pop.extend(archive.members().iter().cloned());
        trace_population(&mut trace, iteration, &pop);
    }
    let (dominant, _) = immune_select(&pop, cfg.nd, cfg.na);
    let frontier = archive_from_lists(dominant, cfg.nd, cfg.nd);
    Ok(finish(Algorithm::HaniV2, frontier, &eval, counters, trace, cfg.keep_eval_log, start))
}

/// Warm start for the annealing-archive drivers: a short immune run whose
/// frontier seeds the archive. Uses `init_archive_iters` iterations.
pub fn init_archive<R: Rng + ?Sized>(
    ctx: &EvalContext,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<RunResult> {
    let mut warm = cfg.clone();
    warm.max_iter = cfg.init_archive_iters;
    warm.collect_trace = false;
    run_nnia(ctx, &warm, rng)
}

/// Runs one algorithm end to end with an RNG seeded from `cfg.seed`.
/// Drivers that need a warm-started archive build it here first, on the
/// same RNG stream; its evaluations, wall time, and counters fold into the
/// returned result.
pub fn run_algorithm(algo: Algorithm, ctx: &EvalContext, cfg: &AlgoConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    match algo {
        Algorithm::Icf => {
            let start = Instant::now();
            let mut eval = Evaluator::new(ctx);
            let mut list = run_icf(ctx)?;
            eval.evaluate(&mut list)?;
            let frontier = archive_from_lists(vec![list], 1, 1);
            Ok(finish(
                Algorithm::Icf,
                frontier,
                &eval,
                OpCounters::default(),
                cfg.collect_trace.then(Vec::new),
                cfg.keep_eval_log,
                start,
            ))
        }
        Algorithm::Nsga2 => run_nsga2(ctx, cfg, &mut rng),
        Algorithm::Nnia => run_nnia(ctx, cfg, &mut rng),
        Algorithm::HanV1 => run_hanv1(ctx, cfg, &mut rng),
        Algorithm::HaniV1 => run_haniv1(ctx, cfg, &mut rng),
        Algorithm::Amosa | Algorithm::HanV2 | Algorithm::HaniV2 => {
            let init = init_archive(ctx, cfg, &mut rng)?;
            let mut result = match algo {
                Algorithm::Amosa => run_amosa(ctx, cfg, &mut rng, &init.frontier),
                Algorithm::HanV2 => run_hanv2(ctx, cfg, &mut rng, &init.frontier),
                _ => run_haniv2(ctx, cfg, &mut rng, &init.frontier),
            }?;
            result.evaluations += init.evaluations;
            result.wall_time += init.wall_time;
            result.counters.merge(&init.counters);
            if let (Some(log), Some(init_log)) = (result.eval_log.as_mut(), init.eval_log) {
                log.extend(init_log);
                log.sort_by(|a, b| a.0.cmp(&b.0));
                log.dedup_by(|a, b| a.0 == b.0);
            }
            Ok(result)
        }
    }
}
