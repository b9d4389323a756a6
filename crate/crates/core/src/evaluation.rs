//! Quality measurement: list-level metrics (precision, intra-list
//! diversity, novelty), frontier-shape metrics (SM, MID, DM, SNS), TOPSIS
//! ranking of algorithms over those metrics, and the final pick of one
//! list from a frontier by closeness to the ideal point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveVector, RecList};
use crate::pareto::ParetoArchive;
use crate::ratings::{ItemId, ItemSimilarity, RatingsMatrix, UserId};

/// Ratings at or above this count as relevant when scoring precision.
pub const DEFAULT_PRECISION_THRESHOLD: f64 = 3.0;

/// Fraction of list items the user rated at least `threshold` in the test
/// split. An unrated or low-rated item is a miss; no relevant test items
/// at all means precision 0.
pub fn precision(items: &[ItemId], test: &RatingsMatrix, user: UserId, threshold: f64) -> f64 {
    debug_assert!(!items.is_empty());
    let hits = items
        .iter()
        .filter(|&&i| test.rating(user, i).map_or(false, |r| r >= threshold))
        .count();
    hits as f64 / items.len() as f64
}

/// Mean pairwise similarity over the list: lower means more diverse.
/// Complements the diversity objective exactly: D(R) + f2(R) = 1 whenever
/// similarities stay in [0, 1].
pub fn intra_diversity(items: &[ItemId], sim: &impl ItemSimilarity) -> Result<f64> {
    let n = items.len();
    if n < 2 {
        return Err(Error::DiversityUndefined);
    }
    let mut total = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            total += sim.similarity(items[a], items[b]);
        }
    }
    Ok(2.0 * total / (n as f64 * (n - 1) as f64))
}

/// Mean training-set popularity (rating count) of the list items: lower
/// means more novel. `popularity` is indexed by dense item id.
pub fn novelty(items: &[ItemId], popularity: &[u32]) -> f64 {
    debug_assert!(!items.is_empty());
    let total: f64 = items.iter().map(|&i| f64::from(popularity[i.0 as usize])).sum();
    total / items.len() as f64
}

/// List-level scores for one selected recommendation list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityReport {
    /// Hit rate against relevant test items; in [0, 1].
    pub precision: f64,
    /// Mean pairwise similarity; lower is more diverse.
    pub diversity: f64,
    /// Mean item popularity; lower is more novel.
    pub novelty: f64,
}

impl QualityReport {
    pub fn measure(
        items: &[ItemId],
        test: &RatingsMatrix,
        user: UserId,
        threshold: f64,
        sim: &impl ItemSimilarity,
        popularity: &[u32],
    ) -> Result<Self> {
        Ok(QualityReport {
            precision: precision(items, test, user, threshold),
            diversity: intra_diversity(items, sim)?,
            novelty: novelty(items, popularity),
        })
    }
}

/// Shape metrics of one Pareto frontier. SM and SNS need at least two
/// points and are `None` below that; MID and DM are always defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierReport {
    pub size: usize,
    /// Mean Euclidean gap between f1-consecutive members.
    pub sm: Option<f64>,
    /// Mean range-normalized distance to the per-objective maximum.
    pub mid: f64,
    /// Diagonal extent of the frontier's bounding box.
    pub dm: f64,
    /// Spread of raw member magnitudes around MID.
    pub sns: Option<f64>,
    /// An objective had zero range across the frontier; its MID terms
    /// contributed 0.
    pub degenerate_range: bool,
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Computes SM, MID, DM, and SNS over a frontier's objective vectors.
/// Neighbor order for SM sorts by f1 ascending (ties by f2). MID
/// normalizes each coordinate by that objective's range over the frontier
/// itself; SNS compares raw member magnitudes against MID.
pub fn frontier_metrics(frontier: &[ObjectiveVector]) -> Result<FrontierReport> {
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    let n = frontier.len();
    let sm = (n >= 2).then(|| {
        let mut sorted = frontier.to_vec();
        sorted.sort_by(|a, b| {
            a.accuracy.total_cmp(&b.accuracy).then(a.diversity.total_cmp(&b.diversity))
        });
        let gaps: f64 = sorted
            .windows(2)
            .map(|w| {
                let da = w[1].accuracy - w[0].accuracy;
                let dd = w[1].diversity - w[0].diversity;
                (da * da + dd * dd).sqrt()
            })
            .sum();
        gaps / (n - 1) as f64
    });
    let (min_a, max_a) = min_max(frontier.iter().map(|o| o.accuracy));
    let (min_d, max_d) = min_max(frontier.iter().map(|o| o.diversity));
    let range_a = max_a - min_a;
    let range_d = max_d - min_d;
    let mid = frontier
        .iter()
        .map(|o| {
            let ta = if range_a > 0.0 { (o.accuracy - max_a) / range_a } else { 0.0 };
            let td = if range_d > 0.0 { (o.diversity - max_d) / range_d } else { 0.0 };
            (ta * ta + td * td).sqrt()
        })
        .sum::<f64>()
        / n as f64;
    let dm = (range_a * range_a + range_d * range_d).sqrt();
    let sns = (n >= 2).then(|| {
        let ss: f64 = frontier
            .iter()
            .map(|o| {
                let c = (o.accuracy * o.accuracy + o.diversity * o.diversity).sqrt();
                (mid - c) * (mid - c)
            })
            .sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(FrontierReport {
        size: n,
        sm,
        mid,
        dm,
        sns,
        degenerate_range: range_a == 0.0 || range_d == 0.0,
    })
}

/// Criterion weights in column order (SM, MID, DM, SNS).
pub const TOPSIS_WEIGHTS: [f64; 4] = [0.33, 0.17, 0.17, 0.33];

/// Lower-is-better flags per column: SM and MID are costs, DM and SNS are
/// benefits.
const COST_COLUMN: [bool; 4] = [true, true, false, false];

/// Frontier metrics per algorithm, ready for ranking. Columns are
/// (SM, MID, DM, SNS).
#[derive(Debug, Clone, Serialize)]
pub struct DecisionMatrix {
    pub algorithms: Vec<String>,
    pub rows: Vec<[f64; 4]>,
    pub weights: [f64; 4],
}

impl DecisionMatrix {
    pub fn new(algorithms: Vec<String>, rows: Vec<[f64; 4]>) -> Self {
        assert_eq!(algorithms.len(), rows.len());
        DecisionMatrix { algorithms, rows, weights: TOPSIS_WEIGHTS }
    }
}

/// One ranked alternative; rows keep the decision matrix order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopsisRow {
    pub algorithm: String,
    /// Relative closeness to the ideal alternative, in [0, 1].
    pub clo: f64,
    /// 1 = best; ties broken by row order.
    pub rank: usize,
}

/// TOPSIS over the decision matrix: vector-normalize each column, weight,
/// take per-column ideals (min for costs, max for benefits), and score
/// each row by closeness CLO = d_minus / (d_minus + d_plus). Rows
/// equidistant from both ideals (all alternatives identical) score 0.5.
pub fn topsis_rank(dm: &DecisionMatrix) -> Result<Vec<TopsisRow>> {
    let n = dm.rows.len();
    assert_eq!(dm.algorithms.len(), n);
    if n < 2 {
        return Err(Error::TopsisSingleRow);
    }
    let mut weighted = vec![[0.0f64; 4]; n];
    for j in 0..4 {
        let norm = dm.rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::TopsisZeroColumn(j));
        }
        for (w, r) in weighted.iter_mut().zip(&dm.rows) {
            w[j] = r[j] / norm * dm.weights[j];
        }
    }
    let mut ideal_pos = [0.0f64; 4];
    let mut ideal_neg = [0.0f64; 4];
    for j in 0..4 {
        let (lo, hi) = min_max(weighted.iter().map(|w| w[j]));
        if COST_COLUMN[j] {
            ideal_pos[j] = lo;
            ideal_neg[j] = hi;
        } else {
            ideal_pos[j] = hi;
            ideal_neg[j] = lo;
        }
    }
    let dist = |a: &[f64; 4], b: &[f64; 4]| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut rows: Vec<TopsisRow> = weighted
        .iter()
        .zip(&dm.algorithms)
        .map(|(w, name)| {
            let d_plus = dist(w, &ideal_pos);
            let d_minus = dist(w, &ideal_neg);
            let clo = if d_plus + d_minus == 0.0 { 0.5 } else { d_minus / (d_minus + d_plus) };
            TopsisRow { algorithm: name.clone(), clo, rank: 0 }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rows[b].clo.total_cmp(&rows[a].clo).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        rows[i].rank = pos + 1;
    }
    Ok(rows)
}

/// Picks the frontier member closest to the ideal point. Members are
/// sorted by (f1, f2, items), each objective is min-max scaled over the
/// frontier (a zero range maps everyone to 0.5), the ideal point is the
/// componentwise scaled maximum, and the first member at minimum Euclidean
/// distance wins.
pub fn select_final(frontier: &ParetoArchive) -> Result<RecList> {
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    let mut members: Vec<&RecList> = frontier.members().iter().collect();
    members.sort_by(|a, b| {
        let (oa, ob) = (cached(a), cached(b));
        oa.accuracy
            .total_cmp(&ob.accuracy)
            .then(oa.diversity.total_cmp(&ob.diversity))
            .then(a.items().cmp(b.items()))
    });
    let objs: Vec<ObjectiveVector> = members.iter().map(|m| cached(m)).collect();
    let (min_a, max_a) = min_max(objs.iter().map(|o| o.accuracy));
    let (min_d, max_d) = min_max(objs.iter().map(|o| o.diversity));
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let scaled: Vec<[f64; 2]> = objs
        .iter()
        .map(|o| [scale(o.accuracy, min_a, max_a), scale(o.diversity, min_d, max_d)])
        .collect();
    let ideal = scaled.iter().fold([f64::NEG_INFINITY; 2], |acc, s| {
        [acc[0].max(s[0]), acc[1].max(s[1])]
    });
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, s) in scaled.iter().enumerate() {
        let d = ((s[0] - ideal[0]).powi(2) + (s[1] - ideal[1]).powi(2)).sqrt();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    Ok(members[best].clone())
}

fn cached(list: &RecList) -> ObjectiveVector {
    list.cached().expect("frontier members carry cached objectives")
}
