//! Command line for the multi-objective recommender experiments.
//!
//! Exit codes for `run`: 0 clean, 1 some cells failed (recorded in
//! `run.json`), 2 unreadable dataset or config, 3 unresolvable cohort.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use himars::config::load_config;
use himars::experiment::{run_experiment, RunError};
use himars::reports::{rank_metric_rows, write_reports, MetricRow};
use himars_core::algorithms::{run_algorithm, AlgoConfig, Algorithm, RunRecord};
use himars_core::evaluation::select_final;
use himars_core::objectives::EvalContext;
use himars_core::ratings::{
    item_similarity, load_ratings, split_train_test, top_k_candidates, ItemId, RatingsMatrix,
    SimilarityMode,
};

#[derive(Parser)]
#[command(name = "himars", version, about = "Multi-objective top-list recommender experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write its report bundle.
    Run {
        /// Flat key = value experiment file.
        #[arg(long)]
        config: PathBuf,
        /// Reuse the simulation-0 split for every simulation.
        #[arg(long)]
        fixed_split: bool,
    },
    /// Split a ratings file into train and test halves.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "train.csv")]
        out_train: PathBuf,
        #[arg(long, default_value = "test.csv")]
        out_test: PathBuf,
    },
    /// Run one algorithm for one user over the full dataset and print the
    /// frontier and selected list as JSON.
    Recommend {
        #[arg(long)]
        dataset: PathBuf,
        /// External user id.
        #[arg(long)]
        user: u64,
        /// icf, nsga2, amosa, nnia, hanv1, hanv2, haniv1 or haniv2.
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        top_k: usize,
        #[arg(long, default_value_t = 10)]
        list_size: usize,
        #[arg(long, default_value_t = 20)]
        n_neighbors: usize,
        /// Override the search iteration count.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Override the genetic population size.
        #[arg(long)]
        pop_size: Option<usize>,
    },
    /// Rank each user's algorithms from an aggregate frontier-metric CSV
    /// (the `frontier.csv` a run emits) and print the ranking CSV.
    Rank {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, fixed_split } => cmd_run(&config, fixed_split),
        Command::Split { dataset, test_fraction, seed, out_train, out_test } => {
            cmd_split(&dataset, test_fraction, seed, &out_train, &out_test)
        }
        Command::Recommend {
            dataset,
            user,
            algo,
            seed,
            top_k,
            list_size,
            n_neighbors,
            max_iter,
            pop_size,
        } => cmd_recommend(
            &dataset,
            user,
            &algo,
            seed,
            top_k,
            list_size,
            n_neighbors,
            max_iter,
            pop_size,
        ),
        Command::Rank { input } => cmd_rank(&input),
    };
    std::process::exit(code);
}

fn cmd_run(config_path: &Path, fixed_split: bool) -> i32 {
    let mut cfg = match load_config(config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    if fixed_split {
        cfg.fixed_split = true;
    }
    match run_experiment(&cfg) {
        Err(RunError::Dataset(e)) => {
            eprintln!("error: {e:#}");
            2
        }
        Err(RunError::Cohort(msg)) => {
            eprintln!("error: {msg}");
            3
        }
        Ok(outcome) => {
            if let Err(e) = write_reports(&cfg, &outcome) {
                eprintln!("error: {e:#}");
                return 2;
            }
            println!(
                "{} cells completed, {} failed; reports in {}",
                outcome.cells.len(),
                outcome.failures.len(),
                cfg.out_dir.display()
            );
            if outcome.failures.is_empty() {
                0
            } else {
                1
            }
        }
    }
}

fn read_dataset(path: &Path) -> Result<RatingsMatrix, String> {
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    load_ratings(BufReader::new(file))
        .map(|(m, _)| m)
        .map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn write_triples(path: &Path, matrix: &RatingsMatrix) -> Result<(), String> {
    let mut out = String::new();
    for e in matrix.entries() {
        out.push_str(&format!(
            "{},{},{}\n",
            matrix.ids().raw_user(e.user),
            matrix.ids().raw_item(e.item),
            e.value
        ));
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_split(
    dataset: &Path,
    test_fraction: f64,
    seed: u64,
    out_train: &Path,
    out_test: &Path,
) -> i32 {
    let matrix = match read_dataset(dataset) {
        Ok(m) => m,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let split = match split_train_test(&matrix, test_fraction, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for (path, half) in [(out_train, &split.train), (out_test, &split.test)] {
        if let Err(msg) = write_triples(path, half) {
            eprintln!("error: {msg}");
            return 2;
        }
    }
    println!(
        "{} train / {} test ratings (fraction {}, seed {}) -> {}, {}",
        split.train.n_ratings(),
        split.test.n_ratings(),
        test_fraction,
        seed,
        out_train.display(),
        out_test.display()
    );
    0
}

#[allow(clippy::too_many_arguments)]
fn cmd_recommend(
    dataset: &Path,
    user_raw: u64,
    algo_name: &str,
    seed: u64,
    top_k: usize,
    list_size: usize,
    n_neighbors: usize,
    max_iter: Option<usize>,
    pop_size: Option<usize>,
) -> i32 {
    let algo: Algorithm = match algo_name.parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let matrix = match read_dataset(dataset) {
        Ok(m) => m,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let Some(user) = matrix.ids().dense_user(user_raw) else {
        eprintln!("error: unknown user id {user_raw}");
        return 3;
    };
    let predict = item_similarity(&matrix, SimilarityMode::AdjustedCosine);
    let objective = item_similarity(&matrix, SimilarityMode::Cosine);
    let context = top_k_candidates(&matrix, user, top_k, &predict, n_neighbors)
        .and_then(|candidates| {
            let rated: Vec<ItemId> =
                matrix.user_ratings(user).iter().map(|&(i, _)| i).collect();
            EvalContext::from_parts(user, candidates, rated, list_size, &objective)
        });
    let ctx = match context {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    let mut cfg = AlgoConfig { seed, ..AlgoConfig::default() };
    if let Some(iters) = max_iter {
        cfg.max_iter = iters;
    }
    if let Some(pop) = pop_size {
        cfg.pop_size = pop;
    }
    let result = match run_algorithm(algo, &ctx, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let selected = match select_final(&result.frontier) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let record = RunRecord::new(&result, user_raw, seed, |i| matrix.ids().raw_item(i), true);
    let selected: Vec<u64> = selected.items().iter().map(|&i| matrix.ids().raw_item(i)).collect();
    #[derive(serde::Serialize)]
    struct Out {
        record: RunRecord,
        selected: Vec<u64>,
    }
    let json = serde_json::to_string_pretty(&Out { record, selected })
        .expect("recommendation serializes");
    let mut stdout = std::io::stdout();
    let _ = stdout.write_all(json.as_bytes());
    let _ = stdout.write_all(b"\n");
    0
}

fn cmd_rank(input: &Path) -> i32 {
    let mut reader = match csv::Reader::from_path(input) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", input.display());
            return 2;
        }
    };
    let mut rows: Vec<MetricRow> = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        };
        if record.len() != 6 {
            eprintln!("error: expected 6 columns (user,algorithm,sm,mid,dm,sns)");
            return 2;
        }
        let parse = |idx: usize| -> Option<f64> { record[idx].trim().parse().ok() };
        let user: u64 = match record[0].trim().parse() {
            Ok(u) => u,
            Err(_) => {
                eprintln!("error: bad user id {:?}", &record[0]);
                return 2;
            }
        };
        match (parse(2), parse(3), parse(4), parse(5)) {
            (Some(sm), Some(mid), Some(dm), Some(sns)) => rows.push(MetricRow {
                user,
                algorithm: record[1].trim().to_string(),
                metrics: [sm, mid, dm, sns],
            }),
            _ => {
                eprintln!("note: user {user} has undefined metrics; skipping that row");
            }
        }
    }
    let (table, skipped) = rank_metric_rows(&rows);
    for user in skipped {
        eprintln!("note: user {user} could not be ranked");
    }
    print!("{table}");
    0
}
