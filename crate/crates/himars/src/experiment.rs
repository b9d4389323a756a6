//! Experiment orchestration: seeded splits, per-cell runs, failure capture.
//!
//! A cell is one (simulation, user, algorithm) run. Cells are independent
//! and deterministic given the dataset and the master seed: the split seed
//! and every cell seed are derived along fixed integer paths, so adding an
//! algorithm or a user never perturbs any other cell's stream.

use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use anyhow::anyhow;
use serde::Serialize;

use himars_core::algorithms::{run_algorithm, Algorithm, RunRecord};
use himars_core::evaluation::{frontier_metrics, select_final, FrontierReport, QualityReport};
use himars_core::objectives::EvalContext;
use himars_core::ratings::{
    item_popularity, item_similarity, item_similarity_restricted, load_ratings,
    split_train_test, top_k_candidates, ItemId, RatingsMatrix, SimilarityMatrix,
    SimilarityMode, UserId,
};
use himars_core::rng::{derive_seed, fnv1a, rng_from_seed};

use crate::config::{ExperimentConfig, UserSelection};

/// Failures that abort the whole experiment before any cell runs.
#[derive(Debug)]
pub enum RunError {
    /// The dataset cannot be read or parsed. Exit code 2.
    Dataset(anyhow::Error),
    /// The requested cohort cannot be resolved against the dataset.
    /// Exit code 3.
    Cohort(String),
}

/// One completed cell.
#[derive(Debug)]
pub struct CellOutput {
    pub simulation: usize,
    pub user: u64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub record: RunRecord,
    /// External ids of the list picked from the frontier.
    pub selected: Vec<u64>,
    pub quality: QualityReport,
    pub frontier_report: FrontierReport,
}

/// One cell that errored or panicked; the rest of the run proceeds.
#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub simulation: usize,
    pub user: u64,
    pub algorithm: String,
    pub message: String,
}

/// Everything a finished experiment hands to the report writers.
#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Resolved cohort, in run order.
    pub users: Vec<u64>,
    /// Sorted by (simulation, cohort position, algorithm position).
    pub cells: Vec<CellOutput>,
    pub failures: Vec<CellFailure>,
}

/// Path tag separating split seeds from cell seeds.
fn split_tag() -> u64 {
    fnv1a(b"split")
}

/// Seed for simulation `sim`'s train/test split.
pub fn split_seed(master: u64, sim: usize, fixed_split: bool) -> u64 {
    let eff = if fixed_split { 0 } else { sim as u64 };
    derive_seed(master, &[split_tag(), eff])
}

/// Seed for one (simulation, user, algorithm) cell. Uses the external user
/// id and a name hash, so the stream survives dataset reindexing and
/// algorithm-set changes.
pub fn cell_seed(master: u64, sim: usize, user: u64, algo: Algorithm) -> u64 {
    derive_seed(master, &[sim as u64, user, fnv1a(algo.name().as_bytes())])
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<RatingsMatrix, RunError> {
    let file = File::open(&cfg.dataset).map_err(|e| {
        RunError::Dataset(anyhow!("cannot open {}: {e}", cfg.dataset.display()))
    })?;
    let (matrix, _stats) = load_ratings(BufReader::new(file)).map_err(|e| {
        RunError::Dataset(anyhow!("cannot parse {}: {e}", cfg.dataset.display()))
    })?;
    Ok(matrix)
}

/// Resolves the configured cohort to external ids, verifying each against
/// the full dataset.
fn resolve_users(full: &RatingsMatrix, selection: &UserSelection) -> Result<Vec<u64>, RunError> {
    match selection {
        UserSelection::Explicit(ids) => {
            let unknown: Vec<u64> = ids
                .iter()
                .copied()
                .filter(|&raw| full.ids().dense_user(raw).is_none())
                .collect();
            if unknown.is_empty() {
                Ok(ids.clone())
            } else {
                Err(RunError::Cohort(format!(
                    "unknown user ids: {}",
                    unknown.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(", ")
                )))
            }
        }
        UserSelection::Sample { count, seed } => {
            let n = full.n_users();
            if *count > n {
                return Err(RunError::Cohort(format!(
                    "sample_users = {count} exceeds the dataset's {n} users"
                )));
            }
            let mut rng = rng_from_seed(*seed);
            let picks = rand::seq::index::sample(&mut rng, n, *count);
            let mut ids: Vec<u64> =
                picks.iter().map(|u| full.ids().raw_user(UserId(u as u32))).collect();
            ids.sort_unstable();
            Ok(ids)
        }
    }
}

/// The two similarity spaces of one simulation: mean-centered cosine ranks
/// candidates, plain cosine scores the objectives and the diversity metric.
struct SimPair {
    predict: SimilarityMatrix,
    objective: SimilarityMatrix,
}

/// Builds both similarity matrices for one split, full or restricted to
/// the rows the cohort can touch.
fn build_sims(
    train: &RatingsMatrix,
    cfg: &ExperimentConfig,
    users: &[UserId],
) -> Result<SimPair, String> {
    if !cfg.restricted_similarity {
        return Ok(SimPair {
            predict: item_similarity(train, SimilarityMode::AdjustedCosine),
            objective: item_similarity(train, SimilarityMode::Cosine),
        });
    }
    // Prediction needs rows for the cohort's rated items (a candidate
    // scores against rated neighbours only); objectives need rows for the
    // resulting candidates. Both lookups fall back through symmetry.
    let rated: Vec<ItemId> = users
        .iter()
        .flat_map(|&u| train.user_ratings(u).iter().map(|&(i, _)| i))
        .collect();
    let predict = item_similarity_restricted(train, SimilarityMode::AdjustedCosine, &rated);
    let mut candidates: Vec<ItemId> = Vec::new();
    for &u in users {
        // A user this split starved of training ratings fails their own
        // cells later with a precise message; skip them here.
        if let Ok(c) = top_k_candidates(train, u, cfg.top_k, &predict, cfg.n_neighbors) {
            candidates.extend(c);
        }
    }
    let objective = item_similarity_restricted(train, SimilarityMode::Cosine, &candidates);
    Ok(SimPair { predict, objective })
}

struct SimulationData {
    split: himars_core::ratings::SplitResult,
    sims: SimPair,
    popularity: Vec<u32>,
}

fn prepare_simulation(
    full: &RatingsMatrix,
    cfg: &ExperimentConfig,
    sim: usize,
    users: &[UserId],
) -> Result<SimulationData, String> {
    let seed = split_seed(cfg.master_seed, sim, cfg.fixed_split);
    let split = split_train_test(full, cfg.test_fraction, seed).map_err(|e| e.to_string())?;
    let sims = build_sims(&split.train, cfg, users)?;
    let popularity = item_popularity(&split.train);
    Ok(SimulationData { split, sims, popularity })
}

/// Builds one user's evaluation context over this simulation's train half.
fn build_user_context(
    data: &SimulationData,
    cfg: &ExperimentConfig,
    user: UserId,
) -> Result<EvalContext, String> {
    let train = &data.split.train;
    let candidates = top_k_candidates(train, user, cfg.top_k, &data.sims.predict, cfg.n_neighbors)
        .map_err(|e| e.to_string())?;
    let rated: Vec<ItemId> = train.user_ratings(user).iter().map(|&(i, _)| i).collect();
    EvalContext::from_parts(user, candidates, rated, cfg.list_size, &data.sims.objective)
        .map_err(|e| e.to_string())
}

fn run_cell(
    data: &SimulationData,
    cfg: &ExperimentConfig,
    ctx: &EvalContext,
    sim: usize,
    user_raw: u64,
    algo: Algorithm,
) -> Result<CellOutput, String> {
    let seed = cell_seed(cfg.master_seed, sim, user_raw, algo);
    let mut acfg = cfg.algo.clone();
    acfg.seed = seed;
    let result = run_algorithm(algo, ctx, &acfg).map_err(|e| e.to_string())?;
    let selected = select_final(&result.frontier).map_err(|e| e.to_string())?;
    let quality = QualityReport::measure(
        selected.items(),
        &data.split.test,
        ctx.user(),
        cfg.precision_threshold,
        &data.sims.objective,
        &data.popularity,
    )
    .map_err(|e| e.to_string())?;
    let frontier_report =
        frontier_metrics(&result.frontier.objectives()).map_err(|e| e.to_string())?;
    let ids = data.split.train.ids();
    let record = RunRecord::new(&result, user_raw, seed, |i| ids.raw_item(i), false);
    let selected: Vec<u64> = selected.items().iter().map(|&i| ids.raw_item(i)).collect();
    Ok(CellOutput {
        simulation: sim,
        user: user_raw,
        algorithm: algo,
        seed,
        record,
        selected,
        quality,
        frontier_report,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic: non-string payload".to_string()
    }
}

fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("HIMARS_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder.build().expect("worker pool builds")
}

/// Runs every (simulation, user, algorithm) cell. Cell errors and panics
/// become [`CellFailure`] entries; only dataset and cohort problems abort.
/// `cells.len() + failures.len()` always equals the full grid size.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, RunError> {
    let full = load_dataset(cfg)?;
    let users_raw = resolve_users(&full, &cfg.users)?;
    let users_dense: Vec<UserId> = users_raw
        .iter()
        .map(|&raw| full.ids().dense_user(raw).expect("verified during resolution"))
        .collect();
    let pool = thread_pool();
    let mut cells: Vec<CellOutput> = Vec::new();
    let mut failures: Vec<CellFailure> = Vec::new();
    for sim in 0..cfg.simulations {
        match prepare_simulation(&full, cfg, sim, &users_dense) {
            Err(message) => {
                for &user in &users_raw {
                    for &algo in &cfg.algorithms {
                        failures.push(CellFailure {
                            simulation: sim,
                            user,
                            algorithm: algo.name().to_string(),
                            message: message.clone(),
                        });
                    }
                }
            }
            Ok(data) => {
                let data = Arc::new(data);
                let (done, failed) = pool.install(|| run_simulation(cfg, &data, sim, &users_raw));
                cells.extend(done);
                failures.extend(failed);
            }
        }
    }
    Ok(ExperimentOutcome { users: users_raw, cells, failures })
}

/// All cells of one simulation, in (cohort position, algorithm position)
/// order. Contexts build once per user and are shared across algorithms.
fn run_simulation(
    cfg: &ExperimentConfig,
    data: &Arc<SimulationData>,
    sim: usize,
    users_raw: &[u64],
) -> (Vec<CellOutput>, Vec<CellFailure>) {
    use rayon::prelude::*;
    let contexts: Vec<Result<Arc<EvalContext>, String>> = users_raw
        .par_iter()
        .map(|&raw| {
            let user = data.split.train.ids().dense_user(raw).ok_or_else(|| {
                format!("user {raw} has no ratings at all in this split's train half")
            })?;
            catch_unwind(AssertUnwindSafe(|| build_user_context(data, cfg, user)))
                .unwrap_or_else(|p| Err(panic_message(p)))
                .map(Arc::new)
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..users_raw.len())
        .flat_map(|u| (0..cfg.algorithms.len()).map(move |a| (u, a)))
        .collect();
    let results: Vec<Result<CellOutput, CellFailure>> = tasks
        .par_iter()
        .map(|&(u, a)| {
            let raw = users_raw[u];
            let algo = cfg.algorithms[a];
            let fail = |message: String| CellFailure {
                simulation: sim,
                user: raw,
                algorithm: algo.name().to_string(),
                message,
            };
            let ctx = match &contexts[u] {
                Ok(ctx) => Arc::clone(ctx),
                Err(message) => return Err(fail(message.clone())),
            };
            catch_unwind(AssertUnwindSafe(|| run_cell(data, cfg, &ctx, sim, raw, algo)))
                .unwrap_or_else(|p| Err(panic_message(p)))
                .map_err(fail)
        })
        .collect();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(cell) => cells.push(cell),
            Err(failure) => failures.push(failure),
        }
    }
    (cells, failures)
}
