//! Experiment configuration: a flat `key = value` text file.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! skipped. Unknown keys are rejected so typos fail loudly instead of
//! silently running with defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use himars_core::algorithms::{AlgoConfig, Algorithm};

/// Which users an experiment covers.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSelection {
    /// Explicit external user ids, run in the given order.
    Explicit(Vec<u64>),
    /// A seeded random sample of `count` users, run in ascending id order.
    Sample { count: usize, seed: u64 },
}

/// One experiment: dataset, cohort, protocol knobs, algorithm set, search
/// parameters, and the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub users: UserSelection,
    /// Fraction of ratings withheld as the test half of each split.
    pub test_fraction: f64,
    /// Independent repetitions per (user, algorithm).
    pub simulations: usize,
    pub algorithms: Vec<Algorithm>,
    /// Candidate list length produced by the rating predictor.
    pub top_k: usize,
    /// Recommendation list length searched over.
    pub list_size: usize,
    /// Rated-item neighborhood size for rating prediction.
    pub n_neighbors: usize,
    /// Test ratings at or above this count as relevant.
    pub precision_threshold: f64,
    /// Compute similarity rows only for items the run touches instead of
    /// the full item-item matrix.
    pub restricted_similarity: bool,
    /// Reuse the simulation-0 split for every simulation.
    pub fixed_split: bool,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Shared search knobs; the per-cell seed is derived, so `algo.seed`
    /// is ignored.
    pub algo: AlgoConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            bail!("simulations must be at least 1");
        }
        match &self.users {
            UserSelection::Explicit(ids) => {
                if ids.is_empty() {
                    bail!("user list is empty");
                }
                // A repeated user would overwrite its own cell files and
                // count twice in every aggregate.
                for (pos, id) in ids.iter().enumerate() {
                    if ids[..pos].contains(id) {
                        bail!("user {id} listed twice");
                    }
                }
            }
            UserSelection::Sample { count: 0, .. } => bail!("sample_users must be at least 1"),
            UserSelection::Sample { .. } => {}
        }
        if self.algorithms.is_empty() {
            bail!("algorithm set is empty");
        }
        for (pos, algo) in self.algorithms.iter().enumerate() {
            if self.algorithms[..pos].contains(algo) {
                bail!("algorithm {algo} listed twice");
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            bail!("test_fraction {} must lie strictly between 0 and 1", self.test_fraction);
        }
        if self.list_size < 2 {
            bail!("list_size must be at least 2 (pairwise diversity needs two items)");
        }
        if self.top_k < self.list_size {
            bail!("top_k ({}) must be at least list_size ({})", self.top_k, self.list_size);
        }
        if self.n_neighbors == 0 {
            bail!("n_neighbors must be at least 1");
        }
        self.algo.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }
}

fn defaults() -> ExperimentConfig {
    ExperimentConfig {
        dataset: PathBuf::new(),
        users: UserSelection::Explicit(Vec::new()),
        test_fraction: 0.2,
        simulations: 20,
        algorithms: Algorithm::ALL.to_vec(),
        top_k: 100,
        list_size: 10,
        n_neighbors: 20,
        precision_threshold: himars_core::evaluation::DEFAULT_PRECISION_THRESHOLD,
        restricted_similarity: false,
        fixed_split: false,
        master_seed: 0,
        out_dir: PathBuf::new(),
        algo: AlgoConfig { seed: 0, ..AlgoConfig::default() },
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("key '{key}': cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("key '{key}': expected true or false, got {other:?}"),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|part| parse_value(key, part.trim())).collect()
}

/// Parses the flat key/value format. Later assignments to the same key
/// override earlier ones.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = defaults();
    let mut have_dataset = false;
    let mut have_users = false;
    let mut have_out = false;
    let mut sample_count: Option<usize> = None;
    let mut sample_seed: u64 = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got {line:?}", idx + 1))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "dataset" => {
                cfg.dataset = PathBuf::from(value);
                have_dataset = true;
            }
            "users" => {
                cfg.users = UserSelection::Explicit(parse_list(key, value)?);
                have_users = true;
            }
            "sample_users" => {
                sample_count = Some(parse_value(key, value)?);
                have_users = true;
            }
            "sample_seed" => sample_seed = parse_value(key, value)?,
            "test_fraction" => cfg.test_fraction = parse_value(key, value)?,
            "simulations" => cfg.simulations = parse_value(key, value)?,
            "algorithms" => {
                cfg.algorithms = if value == "all" {
                    Algorithm::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(|part| part.trim().parse().map_err(|e| anyhow!("{e}")))
                        .collect::<Result<_>>()?
                };
            }
            "top_k" => cfg.top_k = parse_value(key, value)?,
            "list_size" => cfg.list_size = parse_value(key, value)?,
            "n_neighbors" => cfg.n_neighbors = parse_value(key, value)?,
            "precision_threshold" => cfg.precision_threshold = parse_value(key, value)?,
            "restricted_similarity" => cfg.restricted_similarity = parse_bool(key, value)?,
            "fixed_split" => cfg.fixed_split = parse_bool(key, value)?,
            "master_seed" => cfg.master_seed = parse_value(key, value)?,
            "out_dir" => {
                cfg.out_dir = PathBuf::from(value);
                have_out = true;
            }
            "max_iter" => cfg.algo.max_iter = parse_value(key, value)?,
            "pop_size" => cfg.algo.pop_size = parse_value(key, value)?,
            "pc" => cfg.algo.pc = parse_value(key, value)?,
            "pm" => cfg.algo.pm = parse_value(key, value)?,
            "soft_limit" => cfg.algo.soft_limit = parse_value(key, value)?,
            "hard_limit" => cfg.algo.hard_limit = parse_value(key, value)?,
            "tau0" => cfg.algo.tau0 = parse_value(key, value)?,
            "alpha" => cfg.algo.alpha = parse_value(key, value)?,
            "nd" => cfg.algo.nd = parse_value(key, value)?,
            "na" => cfg.algo.na = parse_value(key, value)?,
            "nc" => cfg.algo.nc = parse_value(key, value)?,
            "pm_nnia" => cfg.algo.pm_nnia = parse_value(key, value)?,
            "init_archive_iters" => cfg.algo.init_archive_iters = parse_value(key, value)?,
            other => bail!("line {}: unknown key {other:?}", idx + 1),
        }
    }
    if let Some(count) = sample_count {
        if matches!(cfg.users, UserSelection::Explicit(ref ids) if !ids.is_empty()) {
            bail!("users and sample_users are mutually exclusive");
        }
        cfg.users = UserSelection::Sample { count, seed: sample_seed };
    }
    if !have_dataset {
        bail!("missing required key 'dataset'");
    }
    if !have_users {
        bail!("missing required key 'users' or 'sample_users'");
    }
    if !have_out {
        bail!("missing required key 'out_dir'");
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text)
}
