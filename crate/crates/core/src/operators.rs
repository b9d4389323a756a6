//! Variation operators shared by the optimizers: list crossover with
//! duplicate repair, point mutation, proportional cloning, and the
//! simulated-annealing kernel (candidate perturbation plus the three-way
//! dominance case analysis against the archive).
//!
//! Every operator takes an explicit RNG handle and is otherwise pure, so a
//! run is a deterministic function of its seed. Draw order is part of the
//! contract: tests script exact tapes against it.

use std::collections::HashSet;

use rand::Rng;

use crate::error::Result;
use crate::objectives::{EvalContext, Evaluator, ObjectiveVector, RecList};
use crate::pareto::{dominance, Dominance, ParetoArchive};
use crate::ratings::ItemId;

/// Temperature state threaded through the annealing kernel.
///
/// `tau` changes only through the decay step `tau <- alpha * tau` (or its
/// inverse when a driver is configured to anneal in the opposite
/// direction).
#[derive(Debug, Clone)]
pub struct AnnealState {
    pub tau: f64,
    pub alpha: f64,
    pub current: RecList,
}

impl AnnealState {
    pub fn new(tau: f64, alpha: f64, current: RecList) -> Self {
        assert!(tau > 0.0, "tau must be positive");
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        AnnealState { tau, alpha, current }
    }

    /// The schedule as written: tau shrinks by alpha each round.
    pub fn decay_tau(&mut self) {
        self.tau *= self.alpha;
    }

    /// The reversed schedule: tau grows by 1/alpha each round, so worse
    /// moves become less acceptable over time.
    pub fn grow_tau(&mut self) {
        self.tau /= self.alpha;
    }
}

/// Counters for rare operator edge paths. All zero in a healthy run except
/// `skipped_perturbations`, which ticks when an annealing jump makes a
/// pending replacement item collide with the adopted list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub repair_fallbacks: u64,
    pub blocked_mutations: u64,
    pub skipped_perturbations: u64,
}

impl OpCounters {
    pub fn merge(&mut self, other: &OpCounters) {
        self.repair_fallbacks += other.repair_fallbacks;
        self.blocked_mutations += other.blocked_mutations;
        self.skipped_perturbations += other.skipped_perturbations;
    }
}

/// Builds one child: `head_src[..n_cross]` followed by `tail_src[n_cross..]`,
/// with tail items already present in the head replaced by random items from
/// `tail_src`'s own head segment. That donor pool is provably large enough;
/// the candidate-pool fallback only exists as a guarded escape hatch.
fn splice<R: Rng + ?Sized>(
    head_src: &RecList,
    tail_src: &RecList,
    n_cross: usize,
    ctx: &EvalContext,
    rng: &mut R,
    counters: &mut OpCounters,
) -> RecList {
    let head = &head_src.items()[..n_cross];
    let mut used: HashSet<ItemId> = head.iter().copied().collect();
    let mut pool: Vec<ItemId> =
        tail_src.items()[..n_cross].iter().copied().filter(|i| !used.contains(i)).collect();
    let mut items: Vec<ItemId> = head.to_vec();
    for &tail_item in &tail_src.items()[n_cross..] {
        let chosen = if !used.contains(&tail_item) {
            tail_item
        } else if !pool.is_empty() {
            pool.swap_remove(rng.gen_range(0..pool.len()))
        } else {
            counters.repair_fallbacks += 1;
            let free: Vec<ItemId> =
                ctx.candidates().iter().copied().filter(|c| !used.contains(c)).collect();
            free[rng.gen_range(0..free.len())]
        };
        used.insert(chosen);
        items.push(chosen);
    }
    RecList::new(items, ctx).expect("crossover repair yields a valid list")
}

/// One-point crossover over two size-s lists.
///
/// Draws the cut `n_cross` uniformly from 1..=s, then splices head and tail
/// across the parents in both directions. Children are always valid lists.
/// Draw order: cut, then child 1's repairs in tail order, then child 2's.
pub fn crossover<R: Rng + ?Sized>(
    a: &RecList,
    b: &RecList,
    ctx: &EvalContext,
    rng: &mut R,
    counters: &mut OpCounters,
) -> (RecList, RecList) {
    let s = ctx.list_size();
    debug_assert_eq!(a.items().len(), s);
    debug_assert_eq!(b.items().len(), s);
    let n_cross = rng.gen_range(1..=s);
    let c1 = splice(a, b, n_cross, ctx, rng, counters);
    let c2 = splice(b, a, n_cross, ctx, rng, counters);
    (c1, c2)
}

/// With probability `pm`, replaces one uniformly chosen position with a
/// uniformly chosen candidate item not already in the list; otherwise
/// returns the list unchanged (cache intact). Draw order: gate, position,
/// item. A list already holding every candidate cannot mutate and is
/// returned unchanged, counted.
pub fn mutate<R: Rng + ?Sized>(
    list: &RecList,
    ctx: &EvalContext,
    pm: f64,
    rng: &mut R,
    counters: &mut OpCounters,
) -> RecList {
    debug_assert!((0.0..=1.0).contains(&pm));
    if rng.gen::<f64>() >= pm {
        return list.clone();
    }
    let in_list: HashSet<ItemId> = list.items().iter().copied().collect();
    let available: Vec<ItemId> =
        ctx.candidates().iter().copied().filter(|c| !in_list.contains(c)).collect();
    if available.is_empty() {
        counters.blocked_mutations += 1;
        return list.clone();
    }
    let pos = rng.gen_range(0..list.items().len());
    let item = available[rng.gen_range(0..available.len())];
    let mut items = list.items().to_vec();
    items[pos] = item;
    RecList::new(items, ctx).expect("mutation yields a valid list")
}

/// Allocates `nc` clones across the active members proportionally to their
/// crowding distances, by largest-remainder rounding (remainder ties go to
/// the earlier member). Infinite distances count as twice the largest
/// finite distance, or 1.0 if every distance is infinite; a zero total
/// falls back to an equal split. Clones keep their objective caches.
pub fn clone_proportional(active: &[(RecList, f64)], nc: usize) -> Vec<RecList> {
    assert!(!active.is_empty(), "active set must be non-empty");
    let finite_max = active
        .iter()
        .map(|&(_, d)| d)
        .filter(|d| d.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let cap = if finite_max.is_finite() { finite_max * 2.0 } else { 1.0 };
    let mut weights: Vec<f64> =
        active.iter().map(|&(_, d)| if d.is_finite() { d } else { cap }).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        weights = vec![1.0; active.len()];
    }
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| nc as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("quota is finite").then(a.cmp(&b))
    });
    for &idx in order.iter().take(nc - assigned) {
        counts[idx] += 1;
    }
    let mut clones = Vec::with_capacity(nc);
    for (&(ref list, _), &count) in active.iter().zip(&counts) {
        for _ in 0..count {
            clones.push(list.clone());
        }
    }
    clones
}

/// Candidate items absent from the current list, plus the list positions to
/// perturb: all of 0..s when enough replacements exist, otherwise a random
/// size-|NI| position subset (returned sorted). An exhausted candidate pool
/// yields two empty sets and the caller skips perturbation.
pub fn ni_items<R: Rng + ?Sized>(
    current: &RecList,
    ctx: &EvalContext,
    rng: &mut R,
) -> (Vec<ItemId>, Vec<usize>) {
    let in_list: HashSet<ItemId> = current.items().iter().copied().collect();
    let ni: Vec<ItemId> =
        ctx.candidates().iter().copied().filter(|c| !in_list.contains(c)).collect();
    if ni.is_empty() {
        return (ni, Vec::new());
    }
    let s = ctx.list_size();
    let m = s.min(ni.len());
    let positions: Vec<usize> = if m == s {
        (0..s).collect()
    } else {
        let mut p = rand::seq::index::sample(rng, s, m).into_vec();
        p.sort_unstable();
        p
    };
    (ni, positions)
}

/// Per-objective (max - min) over a reference point set.
pub fn objective_ranges(points: &[ObjectiveVector]) -> [f64; 2] {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        let v = p.as_array();
        for dim in 0..2 {
            lo[dim] = lo[dim].min(v[dim]);
            hi[dim] = hi[dim].max(v[dim]);
        }
    }
    [hi[0] - lo[0], hi[1] - lo[1]]
}

/// Domination amount between two objective vectors: the product over the
/// objectives where they differ of |difference| / range. Equal vectors give
/// 0; a zero range (impossible when both points lie in the reference set)
/// skips that factor.
pub fn domination_amount(a: &ObjectiveVector, b: &ObjectiveVector, ranges: [f64; 2]) -> f64 {
    let av = a.as_array();
    let bv = b.as_array();
    let mut product = 1.0;
    let mut any = false;
    for dim in 0..2 {
        let diff = (av[dim] - bv[dim]).abs();
        if diff == 0.0 || ranges[dim] == 0.0 {
            continue;
        }
        product *= diff / ranges[dim];
        any = true;
    }
    if any {
        product
    } else {
        0.0
    }
}

/// Probability of accepting a worse move: 1 / (1 + exp(delta * tau)).
/// Falls from 0.5 at delta = 0 toward 0 as the domination amount grows.
pub fn acceptance_probability(delta: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (delta * tau).exp())
}

/// Probability of jumping to the archive member with minimal domination
/// amount over the new point: 1 / (1 + exp(-delta_min)).
pub fn jump_probability(delta_min: f64) -> f64 {
    1.0 / (1.0 + (-delta_min).exp())
}

/// One annealing decision for an evaluated `new_pt` against the current
/// point and the archive. This is the three-way case analysis:
///
/// (a) current dominates new: adopt new with probability
///     `acceptance_probability(avg, tau)` where `avg` averages the
///     domination amounts of the archive members dominating new plus the
///     current point.
/// (b) mutually non-dominated (or equal): if t archive members dominate
///     new, adopt it with probability `acceptance_probability(sum/t, tau)`;
///     otherwise adopt it and insert it (evicting members it dominates).
/// (c) new dominates current: if archive members dominate new, jump to the
///     one with minimal domination amount with probability
///     `jump_probability(min)`, else adopt new; with no dominators, adopt
///     and insert it (which also evicts a superseded current).
///
/// Objective ranges are taken over the archive plus both points.
pub fn anneal_step<R: Rng + ?Sized>(
    state: &mut AnnealState,
    archive: &mut ParetoArchive,
    new_pt: RecList,
    rng: &mut R,
) {
    let cur = state.current.cached().expect("current point is evaluated");
    let new = new_pt.cached().expect("new point is evaluated");
    let ranges = {
        let mut pts = archive.objectives();
        pts.push(cur);
        pts.push(new);
        objective_ranges(&pts)
    };
    let archive_objs = archive.objectives();
    let dominators = archive.dominating_members(&new);
    match dominance(&cur, &new) {
        Dominance::FirstDominates => {
            let t = dominators.len();
            let sum: f64 = dominators
                .iter()
                .map(|&i| domination_amount(&archive_objs[i], &new, ranges))
                .sum();
            let avg = (sum + domination_amount(&cur, &new, ranges)) / (t as f64 + 1.0);
            if rng.gen::<f64>() < acceptance_probability(avg, state.tau) {
                state.current = new_pt;
            }
        }
        Dominance::NonDominated | Dominance::Equal => {
            if !dominators.is_empty() {
                let t = dominators.len() as f64;
                let sum: f64 = dominators
                    .iter()
                    .map(|&i| domination_amount(&archive_objs[i], &new, ranges))
                    .sum();
                if rng.gen::<f64>() < acceptance_probability(sum / t, state.tau) {
                    state.current = new_pt;
                }
            } else {
                state.current = new_pt.clone();
                archive.insert(new_pt);
            }
        }
        Dominance::SecondDominates => {
            if !dominators.is_empty() {
                let (best, min_amount) = dominators
                    .iter()
                    .map(|&i| (i, domination_amount(&archive_objs[i], &new, ranges)))
                    .fold((usize::MAX, f64::INFINITY), |acc, (i, d)| {
                        if d < acc.1 {
                            (i, d)
                        } else {
                            acc
                        }
                    });
                if rng.gen::<f64>() < jump_probability(min_amount) {
                    state.current = archive.members()[best].clone();
                } else {
                    state.current = new_pt;
                }
            } else {
                state.current = new_pt.clone();
                archive.insert(new_pt);
            }
        }
    }
}

/// One annealing round: computes the replacement pool and positions via
/// [`ni_items`], then perturbs each chosen position with a random pool item
/// (drawn without replacement) and feeds the result to [`anneal_step`].
/// A drawn item that already sits in the (possibly jumped-to) current list
/// is skipped and counted.
pub fn nlists<R: Rng + ?Sized>(
    state: &mut AnnealState,
    archive: &mut ParetoArchive,
    eval: &mut Evaluator<'_>,
    rng: &mut R,
    counters: &mut OpCounters,
) -> Result<()> {
    debug_assert!(state.current.cached().is_some(), "current point must be evaluated");
    let ctx = eval.ctx();
    let (mut ni, positions) = ni_items(&state.current, ctx, rng);
    for &pos in &positions {
        if ni.is_empty() {
            break;
        }
        let item = ni.remove(rng.gen_range(0..ni.len()));
        if state.current.items().contains(&item) {
            counters.skipped_perturbations += 1;
            continue;
        }
        let mut items = state.current.items().to_vec();
        items[pos] = item;
        let mut new_pt = RecList::new(items, ctx).expect("perturbation yields a valid list");
        eval.evaluate(&mut new_pt)?;
        anneal_step(state, archive, new_pt, rng);
    }
    Ok(())
}
