//! The two optimization objectives and the per-user evaluation context.
//!
//! Search happens inside a fixed per-user world: the top-k candidate items
//! and the user's rated profile. [`EvalContext`] freezes the similarity
//! values that world needs, so objective evaluation is O(s) for accuracy and
//! O(s^2) for diversity regardless of catalog size.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ratings::{top_k_candidates, ItemId, ItemSimilarity, RatingsMatrix, UserId};

/// A point in objective space. Both objectives are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveVector {
    /// f1: mean total similarity between list items and the user's profile.
    pub accuracy: f64,
    /// f2: mean pairwise dissimilarity inside the list, in [0, 1] for
    /// similarities in [0, 1].
    pub diversity: f64,
}

impl ObjectiveVector {
    pub fn new(accuracy: f64, diversity: f64) -> Self {
        ObjectiveVector { accuracy, diversity }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.accuracy, self.diversity]
    }
}

/// Frozen per-user search world: candidate set, rated profile, and every
/// similarity value the objectives can touch.
#[derive(Debug)]
pub struct EvalContext {
    user: UserId,
    candidates: Vec<ItemId>,
    rated: Vec<ItemId>,
    list_size: usize,
    cand_index: HashMap<ItemId, usize>,
    /// Dense |C| x |C| similarity between candidate pairs.
    cand_sims: Vec<f64>,
    /// Per candidate: sum of similarities to every rated item.
    cand_rated_sum: Vec<f64>,
}

impl EvalContext {
    /// Assembles a context from explicit parts, reading all needed values
    /// out of `sim` once. `candidates` keeps its given (ranked) order.
    pub fn from_parts(
        user: UserId,
        candidates: Vec<ItemId>,
        rated: Vec<ItemId>,
        list_size: usize,
        sim: &impl ItemSimilarity,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::BadConfig("candidate set is empty".into()));
        }
        let cand_index: HashMap<ItemId, usize> =
            candidates.iter().enumerate().map(|(pos, &i)| (i, pos)).collect();
        if cand_index.len() != candidates.len() {
            return Err(Error::BadConfig("candidate set contains duplicates".into()));
        }
        if list_size == 0 || list_size > candidates.len() {
            return Err(Error::BadConfig(format!(
                "list size {} must lie in 1..={} candidates",
                list_size,
                candidates.len()
            )));
        }
        if rated.iter().any(|i| cand_index.contains_key(i)) {
            return Err(Error::BadConfig("candidate set overlaps rated profile".into()));
        }
        let nc = candidates.len();
        let mut cand_sims = vec![0.0f64; nc * nc];
        for a in 0..nc {
            for b in 0..nc {
                cand_sims[a * nc + b] = sim.similarity(candidates[a], candidates[b]);
            }
        }
        let cand_rated_sum: Vec<f64> = candidates
            .iter()
            .map(|&c| rated.iter().map(|&j| sim.similarity(c, j)).sum())
            .collect();
        Ok(EvalContext {
            user,
            candidates,
            rated,
            list_size,
            cand_index,
            cand_sims,
            cand_rated_sum,
        })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn candidates(&self) -> &[ItemId] {
        &self.candidates
    }

    pub fn rated(&self) -> &[ItemId] {
        &self.rated
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_candidate(&self, i: ItemId) -> bool {
        self.cand_index.contains_key(&i)
    }

    fn index_of(&self, i: ItemId) -> usize {
        *self.cand_index.get(&i).expect("item is not in the candidate set")
    }
}

impl ItemSimilarity for EvalContext {
    /// Similarity between two candidate items. Panics for non-candidates;
    /// the context only ever sees candidate lists.
    fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self.cand_sims[self.index_of(i) * self.candidates.len() + self.index_of(j)]
    }
}

/// Builds the evaluation context for one user: ranks top-k candidates with
/// `sim_predict` (prediction space) and freezes objective similarities from
/// `sim_objective` (objective space). The two spaces may differ.
pub fn build_context(
    train: &RatingsMatrix,
    user: UserId,
    k: usize,
    list_size: usize,
    sim_predict: &impl ItemSimilarity,
    sim_objective: &impl ItemSimilarity,
    n_neighbors: usize,
) -> Result<EvalContext> {
    let candidates = top_k_candidates(train, user, k, sim_predict, n_neighbors)?;
    let rated: Vec<ItemId> = train.user_ratings(user).iter().map(|&(i, _)| i).collect();
    EvalContext::from_parts(user, candidates, rated, list_size, sim_objective)
}

/// An ordered recommendation list of exactly `list_size` distinct candidate
/// items, with an optional cached objective value.
#[derive(Debug, Clone)]
pub struct RecList {
    items: Vec<ItemId>,
    objectives: Option<ObjectiveVector>,
}

impl RecList {
    /// Validates length, distinctness, and membership in the candidate set.
    pub fn new(items: Vec<ItemId>, ctx: &EvalContext) -> Result<Self> {
        if items.len() != ctx.list_size() {
            return Err(Error::InvalidList(format!(
                "expected {} items, got {}",
                ctx.list_size(),
                items.len()
            )));
        }
        let mut seen = HashSet::with_capacity(items.len());
        for &i in &items {
            if !ctx.is_candidate(i) {
                return Err(Error::InvalidList(format!("item {i} is not a candidate")));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidList(format!("item {i} appears twice")));
            }
        }
        Ok(RecList { items, objectives: None })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    /// Cached objectives, present after the list has been evaluated.
    pub fn cached(&self) -> Option<ObjectiveVector> {
        self.objectives
    }

    /// The list's identity as a set; two lists with the same sorted items
    /// are the same recommendation.
    pub fn sorted_items(&self) -> Vec<ItemId> {
        let mut v = self.items.clone();
        v.sort();
        v
    }

    /// Overwrites the objective cache without computing anything. Used by
    /// the evaluator and by tests that script objective values directly.
    pub(crate) fn force_objectives(&mut self, v: ObjectiveVector) {
        self.objectives = Some(v);
    }
}

/// f1: sum of similarities between every list item and every rated item,
/// divided by list length. 0 when the rated profile is empty.
pub fn f1_accuracy(list: &RecList, ctx: &EvalContext) -> f64 {
    let total: f64 = list.items.iter().map(|&i| ctx.cand_rated_sum[ctx.index_of(i)]).sum();
    total / list.items.len() as f64
}

/// f2: mean of (1 - S) over all ordered item pairs of the list. Undefined
/// for lists shorter than two items.
pub fn f2_diversity(list: &RecList, ctx: &EvalContext) -> Result<f64> {
    let n = list.items.len();
    if n < 2 {
        return Err(Error::DiversityUndefined);
    }
    let mut total = 0.0;
    for (a, &i) in list.items.iter().enumerate() {
        for &j in &list.items[a + 1..] {
            total += 1.0 - ctx.similarity(i, j);
        }
    }
    Ok(2.0 * total / (n * (n - 1)) as f64)
}

/// Objective evaluator with memoization by item multiset.
///
/// `fresh_evaluations` counts objective computations that missed both the
/// list's own cache and the memo table; it is the run's evaluation budget.
pub struct Evaluator<'a> {
    ctx: &'a EvalContext,
    memo: HashMap<Vec<ItemId>, ObjectiveVector>,
    fresh: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: &'a EvalContext) -> Self {
        Evaluator { ctx, memo: HashMap::new(), fresh: 0 }
    }

    pub fn ctx(&self) -> &'a EvalContext {
        self.ctx
    }

    /// Computes (or recalls) the list's objectives and caches them on the
    /// list itself.
    pub fn evaluate(&mut self, list: &mut RecList) -> Result<ObjectiveVector> {
        if let Some(cached) = list.objectives {
            return Ok(cached);
        }
        let key = list.sorted_items();
        if let Some(&known) = self.memo.get(&key) {
            list.objectives = Some(known);
            return Ok(known);
        }
        let v = ObjectiveVector {
            accuracy: f1_accuracy(list, self.ctx),
            diversity: f2_diversity(list, self.ctx)?,
        };
        self.fresh += 1;
        self.memo.insert(key, v);
        list.objectives = Some(v);
        Ok(v)
    }

    pub fn fresh_evaluations(&self) -> u64 {
        self.fresh
    }

    /// Every distinct item set this evaluator computed objectives for, with
    /// its objective vector, sorted by item set. The evaluation log.
    pub fn log(&self) -> Vec<(Vec<ItemId>, ObjectiveVector)> {
        let mut entries: Vec<(Vec<ItemId>, ObjectiveVector)> =
            self.memo.iter().map(|(k, &v)| (k.clone(), v)).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries
    }
}
