//! Pareto dominance machinery: non-dominated sorting, crowding distance,
//! the size-bounded archive with clustering-based thinning, and the ideal
//! point. Both objectives are maximized throughout.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveVector, RecList};
use crate::ratings::ItemId;

/// Relation between two objective vectors under maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    FirstDominates,
    SecondDominates,
    NonDominated,
    Equal,
}

/// Classifies the pair: `a` dominates `b` iff `a >= b` componentwise and the
/// vectors differ.
pub fn dominance(a: &ObjectiveVector, b: &ObjectiveVector) -> Dominance {
    let ge = a.accuracy >= b.accuracy && a.diversity >= b.diversity;
    let le = a.accuracy <= b.accuracy && a.diversity <= b.diversity;
    match (ge, le) {
        (true, true) => Dominance::Equal,
        (true, false) => Dominance::FirstDominates,
        (false, true) => Dominance::SecondDominates,
        (false, false) => Dominance::NonDominated,
    }
}

pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    dominance(a, b) == Dominance::FirstDominates
}

/// Fast non-dominated sort. Returns fronts of indices into `objs`: front 0
/// is the maximal non-dominated subset, front t+1 is maximal after removing
/// fronts 0..=t. Indices inside a front keep ascending order.
pub fn nondominated_sort(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut beats: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            match dominance(&objs[i], &objs[j]) {
                Dominance::FirstDominates => {
                    beats[i].push(j);
                    dominated_by[j] += 1;
                }
                Dominance::SecondDominates => {
                    beats[j].push(i);
                    dominated_by[i] += 1;
                }
                Dominance::NonDominated | Dominance::Equal => {}
            }
        }
    }
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &beats[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// NSGA-II crowding distance over one front.
///
/// Fronts of size <= 2 are all infinite. Per objective, the members at the
/// sorted extremes get infinity and interior members accumulate the
/// normalized gap between their neighbors. An objective whose range is zero
/// is skipped entirely, contributing neither infinities nor gaps.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0f64; n];
    for dim in 0..2 {
        let value = |i: usize| front[i].as_array()[dim];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            value(a).partial_cmp(&value(b)).expect("objective is never NaN").then(a.cmp(&b))
        });
        let range = value(order[n - 1]) - value(order[0]);
        if range == 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let gap = (value(order[w + 1]) - value(order[w - 1])) / range;
            if dist[order[w]].is_finite() {
                dist[order[w]] += gap;
            }
        }
    }
    dist
}

/// Componentwise maximum of a non-empty frontier. Weakly dominates every
/// member.
pub fn ideal_point(frontier: &[ObjectiveVector]) -> Result<ObjectiveVector> {
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    Ok(ObjectiveVector {
        accuracy: frontier.iter().map(|o| o.accuracy).fold(f64::NEG_INFINITY, f64::max),
        diversity: frontier.iter().map(|o| o.diversity).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// What happened to a list offered to the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Accepted; `removed` members it dominated were dropped.
    Inserted { removed: usize },
    /// Rejected: an existing member dominates it.
    Dominated,
    /// Rejected: a member with the same item multiset already exists.
    Duplicate,
}

/// A set of mutually non-dominated lists bounded by a soft and a hard limit.
///
/// Inserting past the soft limit triggers thinning down to the hard limit
/// with single-linkage clustering in objective space, keeping the member
/// nearest each cluster centroid and always retaining the extreme members
/// (max accuracy and max diversity).
#[derive(Debug, Clone)]
pub struct ParetoArchive {
    members: Vec<RecList>,
    soft_limit: usize,
    hard_limit: usize,
    peak_len: usize,
}

impl ParetoArchive {
    pub fn new(soft_limit: usize, hard_limit: usize) -> Self {
        assert!(hard_limit >= 1 && hard_limit <= soft_limit, "limits must satisfy 1 <= HL <= SL");
        ParetoArchive { members: Vec::new(), soft_limit, hard_limit, peak_len: 0 }
    }

    pub fn soft_limit(&self) -> usize {
        self.soft_limit
    }

    pub fn hard_limit(&self) -> usize {
        self.hard_limit
    }

    pub fn members(&self) -> &[RecList] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest membership the archive ever reached, measured before any
    /// thinning kicked in.
    pub fn peak_len(&self) -> usize {
        self.peak_len
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.cached().expect("archive members are evaluated")).collect()
    }

    /// Indices of members whose objectives strictly dominate `obj`.
    pub fn dominating_members(&self, obj: &ObjectiveVector) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| dominates(&m.cached().expect("evaluated"), obj))
            .map(|(i, _)| i)
            .collect()
    }

    /// Offers an evaluated list. Dominated or duplicate lists are rejected;
    /// an accepted list evicts every member it dominates, and growth past
    /// the soft limit thins the archive to the hard limit.
    pub fn insert(&mut self, list: RecList) -> InsertOutcome {
        let obj = list.cached().expect("archive members must carry cached objectives");
        let key = list.sorted_items();
        if self.members.iter().any(|m| m.sorted_items() == key) {
            return InsertOutcome::Duplicate;
        }
        if self
            .members
            .iter()
            .any(|m| dominates(&m.cached().expect("evaluated"), &obj))
        {
            return InsertOutcome::Dominated;
        }
        let before = self.members.len();
        self.members.retain(|m| !dominates(&obj, &m.cached().expect("evaluated")));
        let removed = before - self.members.len();
        self.members.push(list);
        self.peak_len = self.peak_len.max(self.members.len());
        if self.members.len() > self.soft_limit {
            self.thin();
        }
        InsertOutcome::Inserted { removed }
    }

    /// Thins to the hard limit if currently above it. Called by AMOSA-style
    /// drivers at termination.
    pub fn thin_to_hard_limit(&mut self) {
        if self.members.len() > self.hard_limit {
            self.thin();
        }
    }

    /// Index of the member maximizing `primary` (then `secondary`, then the
    /// lowest index).
    fn extreme_index(&self, primary: impl Fn(&ObjectiveVector) -> f64) -> usize {
        let mut best = 0usize;
        for i in 1..self.members.len() {
            let oi = self.members[i].cached().expect("evaluated");
            let ob = self.members[best].cached().expect("evaluated");
            if primary(&oi) > primary(&ob) {
                best = i;
            }
        }
        best
    }

    /// Single-linkage agglomerative clustering down to `hard_limit`
    /// clusters, then one representative per cluster (nearest the cluster
    /// centroid, ties to the lowest member index). The max-accuracy and
    /// max-diversity members override their clusters' representatives so
    /// the frontier extremes survive.
    fn thin(&mut self) {
        let n = self.members.len();
        let target = self.hard_limit;
        debug_assert!(n > target);
        let objs: Vec<[f64; 2]> = self
            .members
            .iter()
            .map(|m| m.cached().expect("evaluated").as_array())
            .collect();
        let point_dist = |a: usize, b: usize| -> f64 {
            let dx = objs[a][0] - objs[b][0];
            let dy = objs[a][1] - objs[b][1];
            (dx * dx + dy * dy).sqrt()
        };
        // Cluster-to-cluster single-linkage distances, updated in place as
        // clusters merge: d(a, b+c) = min(d(a,b), d(a,c)).
        let mut link = vec![vec![0.0f64; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let d = point_dist(a, b);
                link[a][b] = d;
                link[b][a] = d;
            }
        }
        let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        let mut alive = n;
        while alive > target {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..n {
                if clusters[a].is_none() {
                    continue;
                }
                for b in a + 1..n {
                    if clusters[b].is_none() {
                        continue;
                    }
                    if best.map_or(true, |(d, _, _)| link[a][b] < d) {
                        best = Some((link[a][b], a, b));
                    }
                }
            }
            let (_, a, b) = best.expect("more than one cluster remains");
            let merged = clusters[b].take().expect("cluster b is alive");
            clusters[a].as_mut().expect("cluster a is alive").extend(merged);
            for x in 0..n {
                if x != a && clusters[x].is_some() {
                    let d = link[a][x].min(link[b][x]);
                    link[a][x] = d;
                    link[x][a] = d;
                }
            }
            alive -= 1;
        }
        let live: Vec<Vec<usize>> = clusters.into_iter().flatten().collect();
        let mut reps: Vec<usize> = live
            .iter()
            .map(|c| {
                let cx = c.iter().map(|&i| objs[i][0]).sum::<f64>() / c.len() as f64;
                let cy = c.iter().map(|&i| objs[i][1]).sum::<f64>() / c.len() as f64;
                let centroid_dist = |i: usize| {
                    let dx = objs[i][0] - cx;
                    let dy = objs[i][1] - cy;
                    dx * dx + dy * dy
                };
                let mut best = c[0];
                for &i in &c[1..] {
                    if centroid_dist(i) < centroid_dist(best) {
                        best = i;
                    }
                }
                best
            })
            .collect();
        // Diversity extreme first so the accuracy extreme wins if both land
        // in the same cluster; at least one extreme always survives.
        for ext in [self.extreme_index(|o| o.diversity), self.extreme_index(|o| o.accuracy)] {
            if let Some(pos) = live.iter().position(|c| c.contains(&ext)) {
                reps[pos] = ext;
            }
        }
        let keep: HashSet<usize> = reps.into_iter().collect();
        let old = std::mem::take(&mut self.members);
        self.members = old
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(i))
            .map(|(_, m)| m)
            .collect();
    }

    /// Panics if any archive invariant is broken. Test and debugging aid.
    pub fn audit(&self) {
        assert!(self.members.len() <= self.soft_limit, "archive exceeds soft limit");
        let mut keys: Vec<Vec<ItemId>> = Vec::new();
        for m in &self.members {
            assert!(m.cached().is_some(), "archive member without cached objectives");
            let key = m.sorted_items();
            assert!(!keys.contains(&key), "duplicate item multiset in archive");
            keys.push(key);
        }
        for a in 0..self.members.len() {
            for b in a + 1..self.members.len() {
                let oa = self.members[a].cached().expect("evaluated");
                let ob = self.members[b].cached().expect("evaluated");
                assert!(
                    !matches!(
                        dominance(&oa, &ob),
                        Dominance::FirstDominates | Dominance::SecondDominates
                    ),
                    "archive members {a} and {b} are not mutually non-dominated"
                );
            }
        }
    }
}
