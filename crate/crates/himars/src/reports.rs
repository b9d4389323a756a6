//! Report bundle emission: per-cell JSON, frontier CSVs, aggregate tables,
//! per-user algorithm rankings, and the run manifest.
//!
//! Every file is a pure function of the experiment outcome: floats print
//! with Rust's shortest-roundtrip formatting, rows follow the configured
//! cohort and algorithm order, and nothing time- or host-dependent is
//! written. Rerunning the same configuration reproduces the bundle byte
//! for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use himars_core::algorithms::{Algorithm, RunRecord};
use himars_core::evaluation::{topsis_rank, DecisionMatrix, FrontierReport, QualityReport};

use crate::config::ExperimentConfig;
use crate::experiment::{CellFailure, CellOutput, ExperimentOutcome};

/// Min, max, and arithmetic mean of one metric over simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Folds in ascending value order, so the result does not depend on how
/// the caller ordered the simulations (float addition is not associative).
pub fn aggregate(values: &[f64]) -> Aggregate {
    assert!(!values.is_empty(), "aggregate over no values");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let sum: f64 = sorted.iter().sum();
    Aggregate { min: sorted[0], max: *sorted.last().unwrap(), mean: sum / sorted.len() as f64 }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| aggregate(values).mean)
}

/// One parsed row of an aggregate frontier-metric table, the input shape
/// for ranking. Metrics are in SM, MID, DM, SNS order.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub user: u64,
    pub algorithm: String,
    pub metrics: [f64; 4],
}

/// Ranks each user's algorithms by relative closeness over the four
/// frontier metrics. Returns the table body and the users skipped because
/// their rows could not be ranked (a lone algorithm, or a degenerate
/// all-zero criterion column). Users keep first-appearance order.
pub fn rank_metric_rows(rows: &[MetricRow]) -> (String, Vec<u64>) {
    let mut users: Vec<u64> = Vec::new();
    for row in rows {
        if !users.contains(&row.user) {
            users.push(row.user);
        }
    }
    let mut out = String::from("user,algorithm,clo,rank\n");
    let mut skipped = Vec::new();
    for user in users {
        let group: Vec<&MetricRow> = rows.iter().filter(|r| r.user == user).collect();
        let dm = DecisionMatrix::new(
            group.iter().map(|r| r.algorithm.clone()).collect(),
            group.iter().map(|r| r.metrics).collect(),
        );
        match topsis_rank(&dm) {
            Ok(ranked) => {
                for row in ranked {
                    let _ = writeln!(out, "{user},{},{},{}", row.algorithm, row.clo, row.rank);
                }
            }
            Err(_) => skipped.push(user),
        }
    }
    (out, skipped)
}

/// Everything written into `run.json`.
#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    users: &'a [u64],
    failures: &'a [CellFailure],
    /// Users whose algorithm ranking was skipped (undefined or degenerate
    /// frontier metrics).
    ranking_skipped: &'a [u64],
}

/// One cell's JSON artifact.
#[derive(Serialize)]
struct CellReport<'a> {
    record: &'a RunRecord,
    selected: &'a [u64],
    quality: &'a QualityReport,
    frontier_metrics: &'a FrontierReport,
}

fn cell_stem(cell: &CellOutput) -> String {
    format!("u{}_{}_s{}", cell.user, cell.algorithm.name(), cell.simulation)
}

fn frontier_csv(record: &RunRecord, list_size: usize) -> String {
    let mut out = String::from("f1,f2");
    for i in 1..=list_size {
        let _ = write!(out, ",item_{i}");
    }
    out.push('\n');
    for entry in &record.frontier {
        let _ = write!(out, "{},{}", entry.f1, entry.f2);
        for item in &entry.items {
            let _ = write!(out, ",{item}");
        }
        out.push('\n');
    }
    out
}

fn cells_for<'a>(
    outcome: &'a ExperimentOutcome,
    user: u64,
    algo: Algorithm,
) -> impl Iterator<Item = &'a CellOutput> {
    outcome.cells.iter().filter(move |c| c.user == user && c.algorithm == algo)
}

fn quality_csv(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("user,algorithm,metric,min,max,mean\n");
    for &user in &outcome.users {
        for &algo in &cfg.algorithms {
            let reports: Vec<&QualityReport> =
                cells_for(outcome, user, algo).map(|c| &c.quality).collect();
            if reports.is_empty() {
                continue;
            }
            let metrics: [(&str, Vec<f64>); 3] = [
                ("precision", reports.iter().map(|q| q.precision).collect()),
                ("diversity", reports.iter().map(|q| q.diversity).collect()),
                ("novelty", reports.iter().map(|q| q.novelty).collect()),
            ];
            for (name, values) in metrics {
                let a = aggregate(&values);
                let _ = writeln!(
                    out,
                    "{user},{},{name},{},{},{}",
                    algo.name(),
                    a.min,
                    a.max,
                    a.mean
                );
            }
        }
    }
    out
}

/// Per (user, algorithm) mean of each frontier metric over simulations.
/// SM and SNS average over the simulations where they were defined.
fn frontier_means(
    outcome: &ExperimentOutcome,
    user: u64,
    algo: Algorithm,
) -> Option<[Option<f64>; 4]> {
    let reports: Vec<&FrontierReport> =
        cells_for(outcome, user, algo).map(|c| &c.frontier_report).collect();
    if reports.is_empty() {
        return None;
    }
    let sm: Vec<f64> = reports.iter().filter_map(|r| r.sm).collect();
    let sns: Vec<f64> = reports.iter().filter_map(|r| r.sns).collect();
    let mid: Vec<f64> = reports.iter().map(|r| r.mid).collect();
    let dm: Vec<f64> = reports.iter().map(|r| r.dm).collect();
    Some([mean(&sm), mean(&mid), mean(&dm), mean(&sns)])
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The frontier-shape table covers the searching algorithms only; the
/// baseline's one-point frontier has no shape to report.
fn frontier_csv_table(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("user,algorithm,sm,mid,dm,sns\n");
    for &user in &outcome.users {
        for &algo in cfg.algorithms.iter().filter(|a| a.is_multi_objective()) {
            if let Some([sm, mid, dm, sns]) = frontier_means(outcome, user, algo) {
                let _ = writeln!(
                    out,
                    "{user},{},{},{},{},{}",
                    algo.name(),
                    opt(sm),
                    opt(mid),
                    opt(dm),
                    opt(sns)
                );
            }
        }
    }
    out
}

/// Builds fully-defined metric rows for ranking; users with any undefined
/// mean are left out and reported.
fn ranking_rows(
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
) -> (Vec<MetricRow>, Vec<u64>) {
    let mut rows = Vec::new();
    let mut undefined = Vec::new();
    for &user in &outcome.users {
        let mut user_rows = Vec::new();
        let mut complete = true;
        for &algo in cfg.algorithms.iter().filter(|a| a.is_multi_objective()) {
            match frontier_means(outcome, user, algo) {
                Some([Some(sm), Some(mid), Some(dm), Some(sns)]) => user_rows.push(MetricRow {
                    user,
                    algorithm: algo.name().to_string(),
                    metrics: [sm, mid, dm, sns],
                }),
                _ => complete = false,
            }
        }
        if complete && !user_rows.is_empty() {
            rows.extend(user_rows);
        } else {
            undefined.push(user);
        }
    }
    (rows, undefined)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the whole bundle under `cfg.out_dir`:
/// `cells/<cell>.json`, `frontiers/<cell>.csv`, `quality.csv`,
/// `frontier.csv`, `topsis.csv`, and `run.json`.
pub fn write_reports(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let out = &cfg.out_dir;
    let cells_dir = out.join("cells");
    let frontiers_dir = out.join("frontiers");
    fs::create_dir_all(&cells_dir)
        .with_context(|| format!("cannot create {}", cells_dir.display()))?;
    fs::create_dir_all(&frontiers_dir)
        .with_context(|| format!("cannot create {}", frontiers_dir.display()))?;
    for cell in &outcome.cells {
        let stem = cell_stem(cell);
        let report = CellReport {
            record: &cell.record,
            selected: &cell.selected,
            quality: &cell.quality,
            frontier_metrics: &cell.frontier_report,
        };
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write(&cells_dir.join(format!("{stem}.json")), json.as_bytes())?;
        let csv = frontier_csv(&cell.record, cfg.list_size);
        write(&frontiers_dir.join(format!("{stem}.csv")), csv.as_bytes())?;
    }
    write(&out.join("quality.csv"), quality_csv(cfg, outcome).as_bytes())?;
    write(&out.join("frontier.csv"), frontier_csv_table(cfg, outcome).as_bytes())?;
    let (rows, mut skipped) = ranking_rows(cfg, outcome);
    let (topsis, unrankable) = rank_metric_rows(&rows);
    skipped.extend(unrankable);
    skipped.sort_unstable();
    skipped.dedup();
    write(&out.join("topsis.csv"), topsis.as_bytes())?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        users: &outcome.users,
        failures: &outcome.failures,
        ranking_skipped: &skipped,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write(&out.join("run.json"), json.as_bytes())?;
    Ok(())
}
