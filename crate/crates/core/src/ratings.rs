//! Ratings storage, train/test splitting, item-item similarity, and the
//! item-based collaborative filter that produces candidate lists.
//!
//! External ids (arbitrary 64-bit integers from the input file) are remapped
//! to dense indices at load time. All downstream structures work in the dense
//! space; the [`IdMap`] translates back at the reporting boundary. A split
//! shares its parent's `IdMap`, so dense ids mean the same thing in the train
//! and test halves.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Dense user index, assigned in first-appearance order at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct UserId(pub u32);

/// Dense item index, assigned in first-appearance order at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ItemId(pub u32);

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for ItemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional mapping between raw file ids and dense indices.
#[derive(Debug)]
pub struct IdMap {
    raw_users: Vec<u64>,
    raw_items: Vec<u64>,
    user_index: HashMap<u64, UserId>,
    item_index: HashMap<u64, ItemId>,
}

impl IdMap {
    pub fn n_users(&self) -> usize {
        self.raw_users.len()
    }

    pub fn n_items(&self) -> usize {
        self.raw_items.len()
    }

    pub fn raw_user(&self, u: UserId) -> u64 {
        self.raw_users[u.0 as usize]
    }

    pub fn raw_item(&self, i: ItemId) -> u64 {
        self.raw_items[i.0 as usize]
    }

    pub fn dense_user(&self, raw: u64) -> Option<UserId> {
        self.user_index.get(&raw).copied()
    }

    pub fn dense_item(&self, raw: u64) -> Option<ItemId> {
        self.item_index.get(&raw).copied()
    }
}

/// One stored rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingEntry {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
}

/// Bookkeeping from parsing, reported but not fatal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// (user, item) pairs that appeared more than once; the last value won.
    pub duplicates: usize,
}

/// Sparse user-item rating matrix with both row and column access.
///
/// Invariants: entries are sorted by (user, item) and unique per pair, every
/// value is finite and positive, and the dense id spaces are exactly
/// `0..n_users` / `0..n_items` of the owning [`IdMap`]. A matrix produced by
/// [`split_train_test`] keeps the full id space even for users or items that
/// ended up with no entries in its half.
#[derive(Debug)]
pub struct RatingsMatrix {
    entries: Vec<RatingEntry>,
    by_user: Vec<Vec<(ItemId, f64)>>,
    by_item: Vec<Vec<(UserId, f64)>>,
    ids: Arc<IdMap>,
}

impl RatingsMatrix {
    /// Builds a matrix from raw (user, item, rating) triples, assigning dense
    /// ids in first-appearance order. Repeated (user, item) pairs keep the
    /// last value and are counted in [`LoadStats`].
    pub fn from_raw_triples(triples: &[(u64, u64, f64)]) -> Result<(Self, LoadStats)> {
        if triples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut user_index = HashMap::new();
        let mut item_index = HashMap::new();
        let mut raw_users = Vec::new();
        let mut raw_items = Vec::new();
        let mut cells: BTreeMap<(UserId, ItemId), f64> = BTreeMap::new();
        let mut duplicates = 0usize;
        for (pos, &(ru, ri, value)) in triples.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::MalformedRecord {
                    line: pos + 1,
                    reason: format!("rating must be finite and positive, got {value}"),
                });
            }
            let u = *user_index.entry(ru).or_insert_with(|| {
                raw_users.push(ru);
                UserId(raw_users.len() as u32 - 1)
            });
            let i = *item_index.entry(ri).or_insert_with(|| {
                raw_items.push(ri);
                ItemId(raw_items.len() as u32 - 1)
            });
            if cells.insert((u, i), value).is_some() {
                duplicates += 1;
            }
        }
        let ids = Arc::new(IdMap { raw_users, raw_items, user_index, item_index });
        let entries: Vec<RatingEntry> = cells
            .into_iter()
            .map(|((user, item), value)| RatingEntry { user, item, value })
            .collect();
        Ok((Self::assemble(ids, entries), LoadStats { duplicates }))
    }

    /// Rebuilds row/column access from sorted unique entries.
    fn assemble(ids: Arc<IdMap>, entries: Vec<RatingEntry>) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].user, w[0].item) < (w[1].user, w[1].item)));
        let mut by_user = vec![Vec::new(); ids.n_users()];
        let mut by_item = vec![Vec::new(); ids.n_items()];
        for e in &entries {
            by_user[e.user.0 as usize].push((e.item, e.value));
            by_item[e.item.0 as usize].push((e.user, e.value));
        }
        RatingsMatrix { entries, by_user, by_item, ids }
    }

    pub fn n_users(&self) -> usize {
        self.ids.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.ids.n_items()
    }

    pub fn n_ratings(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[RatingEntry] {
        &self.entries
    }

    pub fn ids(&self) -> &Arc<IdMap> {
        &self.ids
    }

    /// Items rated by `u`, sorted by item id.
    pub fn user_ratings(&self, u: UserId) -> &[(ItemId, f64)] {
        &self.by_user[u.0 as usize]
    }

    /// Users who rated `i`, sorted by user id.
    pub fn item_ratings(&self, i: ItemId) -> &[(UserId, f64)] {
        &self.by_item[i.0 as usize]
    }

    pub fn rating(&self, u: UserId, i: ItemId) -> Option<f64> {
        let row = self.user_ratings(u);
        row.binary_search_by_key(&i, |&(item, _)| item).ok().map(|pos| row[pos].1)
    }

    /// Mean rating per user; 0.0 for users with no entries in this matrix.
    pub fn user_means(&self) -> Vec<f64> {
        self.by_user
            .iter()
            .map(|row| {
                if row.is_empty() {
                    0.0
                } else {
                    row.iter().map(|&(_, r)| r).sum::<f64>() / row.len() as f64
                }
            })
            .collect()
    }
}

/// Outcome of a seeded train/test partition.
#[derive(Debug)]
pub struct SplitResult {
    pub train: RatingsMatrix,
    pub test: RatingsMatrix,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Partitions ratings into train and test by a seeded shuffle.
///
/// Exactly `round(n * test_fraction)` entries go to the test half, so the
/// split sizes are a function of `n` and the fraction alone; the seed only
/// decides which entries land where. Both halves share the parent id space.
pub fn split_train_test(
    matrix: &RatingsMatrix,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::BadTestFraction(test_fraction));
    }
    let n = matrix.entries.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut is_test = vec![false; n];
    for &pos in order.iter().take(n_test) {
        is_test[pos] = true;
    }
    let mut train_entries = Vec::with_capacity(n - n_test);
    let mut test_entries = Vec::with_capacity(n_test);
    for (pos, &e) in matrix.entries.iter().enumerate() {
        if is_test[pos] {
            test_entries.push(e);
        } else {
            train_entries.push(e);
        }
    }
    Ok(SplitResult {
        train: RatingsMatrix::assemble(Arc::clone(&matrix.ids), train_entries),
        test: RatingsMatrix::assemble(Arc::clone(&matrix.ids), test_entries),
        seed,
        test_fraction,
    })
}

/// Detected field separator of a delimited ratings file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Separator {
    DoubleColon,
    Comma,
    Tab,
}

impl Separator {
    fn detect(line: &str) -> Option<Separator> {
        if line.contains("::") {
            Some(Separator::DoubleColon)
        } else if line.contains(',') {
            Some(Separator::Comma)
        } else if line.contains('\t') {
            Some(Separator::Tab)
        } else {
            None
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Separator::DoubleColon => line.split("::").collect(),
            Separator::Comma => line.split(',').collect(),
            Separator::Tab => line.split('\t').collect(),
        }
    }
}

/// Parses `user<sep>item<sep>rating[<sep>timestamp]` records.
///
/// The separator (`::`, comma, or tab) is detected from the first non-empty
/// line. Timestamps are ignored. Malformed rows abort with the 1-based line
/// number; blank lines are skipped.
pub fn load_ratings<R: BufRead>(reader: R) -> Result<(RatingsMatrix, LoadStats)> {
    let mut sep: Option<Separator> = None;
    let mut triples: Vec<(u64, u64, f64)> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let sep = match sep {
            Some(s) => s,
            None => {
                let detected = Separator::detect(line).ok_or_else(|| Error::MalformedRecord {
                    line: line_no,
                    reason: "no recognized separator (expected '::', ',' or tab)".into(),
                })?;
                sep = Some(detected);
                detected
            }
        };
        let fields = sep.split(line);
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("expected 3 or 4 fields, got {}", fields.len()),
            });
        }
        let user: u64 = fields[0].trim().parse().map_err(|_| Error::MalformedRecord {
            line: line_no,
            reason: format!("invalid user id {:?}", fields[0]),
        })?;
        let item: u64 = fields[1].trim().parse().map_err(|_| Error::MalformedRecord {
            line: line_no,
            reason: format!("invalid item id {:?}", fields[1]),
        })?;
        let value: f64 = fields[2].trim().parse().map_err(|_| Error::MalformedRecord {
            line: line_no,
            reason: format!("invalid rating {:?}", fields[2]),
        })?;
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("rating must be finite and positive, got {value}"),
            });
        }
        triples.push((user, item, value));
        lines.push(line_no);
    }
    if triples.is_empty() {
        return Err(Error::EmptyInput);
    }
    RatingsMatrix::from_raw_triples(&triples)
}

/// Anything that can report an item-item similarity. Lets the predictor and
/// the objective layer run against either a real matrix or a scripted stub.
pub trait ItemSimilarity {
    fn similarity(&self, i: ItemId, j: ItemId) -> f64;
}

impl<F: Fn(ItemId, ItemId) -> f64> ItemSimilarity for F {
    fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self(i, j)
    }
}

/// Which similarity definition a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMode {
    /// Raw cosine over item rating columns.
    Cosine,
    /// Cosine over co-rater ratings centered by each co-rater's mean.
    AdjustedCosine,
}

#[derive(Debug)]
enum SimStorage {
    /// Upper triangle including the diagonal, row-major packed.
    Packed(Vec<f64>),
    /// Full similarity row per requested target item.
    Rows(HashMap<u32, Vec<f64>>),
}

/// Symmetric item-item similarity table.
///
/// All values lie in [-1, 1]. Degenerate pairs (no co-raters, or a zero
/// denominator) score 0. The diagonal is 1 for any item with at least one
/// rating. Pairs not covered by a restricted matrix also report 0.
#[derive(Debug)]
pub struct SimilarityMatrix {
    mode: SimilarityMode,
    n: usize,
    storage: SimStorage,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - (i * i - i) / 2 + (j - i)
}

impl SimilarityMatrix {
    pub fn mode(&self) -> SimilarityMode {
        self.mode
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    /// True when every item pair is materialized.
    pub fn is_full(&self) -> bool {
        matches!(self.storage, SimStorage::Packed(_))
    }

    /// Writes `item_i,item_j,sim` rows (dense ids, i <= j) for debugging.
    pub fn dump_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "item_i,item_j,sim")?;
        match &self.storage {
            SimStorage::Packed(vals) => {
                for i in 0..self.n {
                    for j in i..self.n {
                        writeln!(out, "{},{},{}", i, j, vals[packed_index(self.n, i, j)])?;
                    }
                }
            }
            SimStorage::Rows(rows) => {
                let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
                for (&t, row) in rows {
                    for j in 0..row.len() as u32 {
                        pairs.insert((t.min(j), t.max(j)));
                    }
                }
                for (i, j) in pairs {
                    writeln!(
                        out,
                        "{},{},{}",
                        i,
                        j,
                        self.similarity(ItemId(i), ItemId(j))
                    )?;
                }
            }
        }
        Ok(())
    }
}

impl ItemSimilarity for SimilarityMatrix {
    fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        let (a, b) = if i.0 <= j.0 { (i.0, j.0) } else { (j.0, i.0) };
        debug_assert!((b as usize) < self.n);
        match &self.storage {
            SimStorage::Packed(vals) => vals[packed_index(self.n, a as usize, b as usize)],
            SimStorage::Rows(rows) => {
                if let Some(row) = rows.get(&i.0) {
                    row[j.0 as usize]
                } else if let Some(row) = rows.get(&j.0) {
                    row[i.0 as usize]
                } else {
                    0.0
                }
            }
        }
    }
}

fn clamp_sim(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Computes the full item-item similarity matrix from training ratings.
///
/// Cost is quadratic in each user's profile length, summed over users, which
/// is the co-rating count and far below items squared for sparse data.
pub fn item_similarity(train: &RatingsMatrix, mode: SimilarityMode) -> SimilarityMatrix {
    let n = train.n_items();
    let len = n * (n + 1) / 2;
    let offsets: Vec<usize> = (0..n).map(|i| i * n - (i * i - i) / 2).collect();
    let storage = match mode {
        SimilarityMode::Cosine => {
            let mut num = vec![0.0f64; len];
            for u in 0..train.n_users() {
                let row = train.user_ratings(UserId(u as u32));
                for (a, &(ia, ra)) in row.iter().enumerate() {
                    let off = offsets[ia.0 as usize] - ia.0 as usize;
                    for &(ib, rb) in &row[a..] {
                        num[off + ib.0 as usize] += ra * rb;
                    }
                }
            }
            let norms: Vec<f64> =
                (0..n).map(|i| num[packed_index(n, i, i)].sqrt()).collect();
            let mut sims = vec![0.0f64; len];
            for i in 0..n {
                for j in i..n {
                    let p = packed_index(n, i, j);
                    sims[p] = if i == j {
                        if norms[i] > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else if norms[i] > 0.0 && norms[j] > 0.0 {
                        clamp_sim(num[p] / (norms[i] * norms[j]))
                    } else {
                        0.0
                    };
                }
            }
            SimStorage::Packed(sims)
        }
        SimilarityMode::AdjustedCosine => {
            let means = train.user_means();
            let mut num = vec![0.0f64; len];
            let mut den_a = vec![0.0f64; len];
            let mut den_b = vec![0.0f64; len];
            for u in 0..train.n_users() {
                let row = train.user_ratings(UserId(u as u32));
                let m = means[u];
                for (a, &(ia, ra)) in row.iter().enumerate() {
                    let ca = ra - m;
                    let off = offsets[ia.0 as usize] - ia.0 as usize;
                    for &(ib, rb) in &row[a..] {
                        let cb = rb - m;
                        let p = off + ib.0 as usize;
                        num[p] += ca * cb;
                        den_a[p] += ca * ca;
                        den_b[p] += cb * cb;
                    }
                }
            }
            let mut sims = vec![0.0f64; len];
            for i in 0..n {
                for j in i..n {
                    let p = packed_index(n, i, j);
                    sims[p] = if i == j {
                        if train.item_ratings(ItemId(i as u32)).is_empty() {
                            0.0
                        } else {
                            1.0
                        }
                    } else if den_a[p] > 0.0 && den_b[p] > 0.0 {
                        clamp_sim(num[p] / (den_a[p].sqrt() * den_b[p].sqrt()))
                    } else {
                        0.0
                    };
                }
            }
            SimStorage::Packed(sims)
        }
    };
    SimilarityMatrix { mode, n, storage }
}

/// Computes similarity rows only for the given target items.
///
/// Holds `targets.len() * n_items` values instead of the full triangle, for
/// memory-constrained runs. Pairs with no target endpoint report 0.
pub fn item_similarity_restricted(
    train: &RatingsMatrix,
    mode: SimilarityMode,
    targets: &[ItemId],
) -> SimilarityMatrix {
    let n = train.n_items();
    let unique: BTreeSet<u32> = targets.iter().map(|t| t.0).collect();
    let means;
    let norms;
    match mode {
        SimilarityMode::Cosine => {
            means = Vec::new();
            norms = (0..n)
                .map(|i| {
                    train
                        .item_ratings(ItemId(i as u32))
                        .iter()
                        .map(|&(_, r)| r * r)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect::<Vec<f64>>();
        }
        SimilarityMode::AdjustedCosine => {
            means = train.user_means();
            norms = Vec::new();
        }
    }
    let mut rows: HashMap<u32, Vec<f64>> = HashMap::new();
    for &t in &unique {
        let target = ItemId(t);
        let mut row = vec![0.0f64; n];
        match mode {
            SimilarityMode::Cosine => {
                let mut num = vec![0.0f64; n];
                for &(u, rt) in train.item_ratings(target) {
                    for &(j, rj) in train.user_ratings(u) {
                        num[j.0 as usize] += rt * rj;
                    }
                }
                let nt = norms[t as usize];
                if nt > 0.0 {
                    for j in 0..n {
                        if j == t as usize {
                            row[j] = 1.0;
                        } else if norms[j] > 0.0 {
                            row[j] = clamp_sim(num[j] / (nt * norms[j]));
                        }
                    }
                }
            }
            SimilarityMode::AdjustedCosine => {
                let mut num = vec![0.0f64; n];
                let mut den_t = vec![0.0f64; n];
                let mut den_j = vec![0.0f64; n];
                for &(u, rt) in train.item_ratings(target) {
                    let m = means[u.0 as usize];
                    let ct = rt - m;
                    for &(j, rj) in train.user_ratings(u) {
                        let cj = rj - m;
                        let p = j.0 as usize;
                        num[p] += ct * cj;
                        den_t[p] += ct * ct;
                        den_j[p] += cj * cj;
                    }
                }
                for j in 0..n {
                    if j == t as usize {
                        if !train.item_ratings(target).is_empty() {
                            row[j] = 1.0;
                        }
                    } else if den_t[j] > 0.0 && den_j[j] > 0.0 {
                        row[j] = clamp_sim(num[j] / (den_t[j].sqrt() * den_j[j].sqrt()));
                    }
                }
            }
        }
        rows.insert(t, row);
    }
    SimilarityMatrix { mode, n, storage: SimStorage::Rows(rows) }
}

/// A weighted-sum rating prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// True when every neighborhood similarity was zero; `value` is then 0.
    pub no_signal: bool,
}

/// Predicts `u`'s rating for unrated `item` from the `n_neighbors` rated
/// items most similar to it: sum(S * R) / sum(|S|) over the neighborhood.
/// Neighbor order on similarity ties is ascending item id.
pub fn predict_rating(
    train: &RatingsMatrix,
    user: UserId,
    item: ItemId,
    sim: &impl ItemSimilarity,
    n_neighbors: usize,
) -> Prediction {
    debug_assert!(train.rating(user, item).is_none(), "prediction target already rated");
    let mut neigh: Vec<(f64, ItemId, f64)> = train
        .user_ratings(user)
        .iter()
        .map(|&(j, r)| (sim.similarity(item, j), j, r))
        .collect();
    neigh.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).expect("similarity is never NaN").then(a.1.cmp(&b.1))
    });
    neigh.truncate(n_neighbors);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(s, _, r) in &neigh {
        num += s * r;
        den += s.abs();
    }
    if den == 0.0 {
        Prediction { value: 0.0, no_signal: true }
    } else {
        Prediction { value: num / den, no_signal: false }
    }
}

/// Ranks every unrated item by predicted rating and returns the best `k`.
///
/// Prediction ties break toward the lower item id. A user with no training
/// ratings has no neighborhood and is rejected as cold.
pub fn top_k_candidates(
    train: &RatingsMatrix,
    user: UserId,
    k: usize,
    sim: &impl ItemSimilarity,
    n_neighbors: usize,
) -> Result<Vec<ItemId>> {
    if train.user_ratings(user).is_empty() {
        return Err(Error::ColdUser(train.ids.raw_user(user)));
    }
    let rated: HashSet<ItemId> = train.user_ratings(user).iter().map(|&(i, _)| i).collect();
    let mut scored: Vec<(ItemId, f64)> = (0..train.n_items() as u32)
        .map(ItemId)
        .filter(|i| !rated.contains(i))
        .map(|i| (i, predict_rating(train, user, i, sim, n_neighbors).value))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("prediction is never NaN").then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Rating count per dense item id; the novelty metric's popularity source.
pub fn item_popularity(train: &RatingsMatrix) -> Vec<u32> {
    train.by_item.iter().map(|col| col.len() as u32).collect()
}
