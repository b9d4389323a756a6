//! Deterministic RNG scripting and toy search worlds for the test suites.
//!
//! [`TapeRng`] replays a fixed sequence of 64-bit words, which lets a test
//! force a specific outcome from `gen_range` or `gen::<f64>()` and then
//! assert the exact state an algorithm reaches. The `word_for_*` helpers
//! compute the tape word that makes the generator produce a wanted value,
//! and the module's tests pin those encodings against the real sampler so
//! any change in sampling internals fails loudly here instead of silently
//! invalidating scripted traces.
//!
//! The context builders make small worlds where objectives either collapse
//! ([`plain_context`]) or vary enough to exercise real trade-offs
//! ([`varied_context`], [`random_context`]); [`enumerate_lists`] walks every
//! possible list so brute force can stand in as the oracle.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, RngCore};

use crate::objectives::{EvalContext, Evaluator, ObjectiveVector, RecList};
use crate::pareto::nondominated_sort;
use crate::ratings::{ItemId, UserId};
use crate::rng::rng_from_seed;

/// Replays a scripted sequence of `u64` words. Panics when the tape runs
/// out or when a consumer asks for anything but full 64-bit words, so a
/// scripted test cannot silently drift past its script.
pub struct TapeRng {
    words: Vec<u64>,
    pos: usize,
}

impl TapeRng {
    pub fn new(words: Vec<u64>) -> Self {
        TapeRng { words, pos: 0 }
    }

    /// Words consumed so far.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// True when every scripted word has been used.
    pub fn exhausted(&self) -> bool {
        self.pos == self.words.len()
    }
}

impl RngCore for TapeRng {
    fn next_u32(&mut self) -> u32 {
        panic!("TapeRng: unexpected 32-bit draw; scripts cover 64-bit draws only");
    }

    fn next_u64(&mut self) -> u64 {
        let w = *self.words.get(self.pos).unwrap_or_else(|| {
            panic!("TapeRng: tape exhausted after {} words", self.words.len())
        });
        self.pos += 1;
        w
    }

    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        panic!("TapeRng: unexpected byte fill");
    }

    fn try_fill_bytes(&mut self, _dest: &mut [u8]) -> Result<(), rand::Error> {
        panic!("TapeRng: unexpected byte fill");
    }
}

/// Tape word that makes `gen_range(0..n)` return `target`.
///
/// The uniform integer sampler widens the word to 128 bits, multiplies by
/// `n`, and takes the high half; `ceil(target * 2^64 / n)` lands exactly on
/// `target` with a low half below the rejection zone, so no retry occurs.
pub fn word_for_uniform(target: u64, n: u64) -> u64 {
    assert!(target < n, "target {target} out of range 0..{n}");
    let num = (target as u128) << 64;
    ((num + n as u128 - 1) / n as u128) as u64
}

/// Tape word that makes `gen::<f64>()` return (approximately) `x` in [0, 1).
/// Exact for dyadic `x` with at most 53 fractional bits.
pub fn word_for_f64(x: f64) -> u64 {
    assert!((0.0..1.0).contains(&x));
    let mantissa = (x * (1u64 << 53) as f64).round() as u64;
    mantissa << 11
}

/// A context over `n` zero-similarity candidates with lists of size `s`.
/// Handy when a test only cares about archive or operator mechanics.
pub fn plain_context(n: u32, s: usize) -> EvalContext {
    EvalContext::from_parts(
        UserId(0),
        (0..n).map(ItemId).collect(),
        vec![],
        s,
        &|_: ItemId, _: ItemId| 0.0,
    )
    .unwrap()
}

/// A list over `ctx` with scripted objective values, bypassing evaluation.
pub fn scripted_list(ctx: &EvalContext, items: &[u32], objectives: ObjectiveVector) -> RecList {
    let mut list = RecList::new(items.iter().map(|&i| ItemId(i)).collect(), ctx)
        .expect("scripted list must be valid for the context");
    list.force_objectives(objectives);
    list
}

/// A context over `n` candidates and three rated items where every item
/// pair gets a distinct deterministic similarity in [0, 1), so both
/// objectives genuinely vary across lists.
pub fn varied_context(n: u32, s: usize) -> EvalContext {
    let candidates: Vec<ItemId> = (0..n).map(ItemId).collect();
    let rated = vec![ItemId(1000), ItemId(1001), ItemId(1002)];
    let sim = |a: ItemId, b: ItemId| {
        if a == b {
            return 1.0;
        }
        let (lo, hi) = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
        ((lo as u64 * 31 + hi as u64 * 17) % 97) as f64 / 96.0
    };
    EvalContext::from_parts(UserId(7), candidates, rated, s, &sim).unwrap()
}

/// A context with fully random symmetric similarities in [0, 1) drawn
/// from `seed`: `n` candidates, `n_rated` rated items, lists of size `s`.
pub fn random_context(seed: u64, n: u32, s: usize, n_rated: u32) -> EvalContext {
    let mut rng = rng_from_seed(seed);
    let candidates: Vec<ItemId> = (0..n).map(ItemId).collect();
    let rated: Vec<ItemId> = (n..n + n_rated).map(ItemId).collect();
    let all: Vec<ItemId> = candidates.iter().chain(&rated).copied().collect();
    let mut table: HashMap<(u32, u32), f64> = HashMap::new();
    for (i, &a) in all.iter().enumerate() {
        for &b in &all[i + 1..] {
            table.insert((a.0, b.0), rng.gen::<f64>());
        }
    }
    let sim = move |a: ItemId, b: ItemId| {
        if a == b {
            return 1.0;
        }
        let key = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
        table[&key]
    };
    EvalContext::from_parts(UserId(0), candidates, rated, s, &sim).unwrap()
}

/// Every size-s sublist of the candidate set, in lexicographic order of
/// candidate positions, unevaluated.
pub fn enumerate_lists(ctx: &EvalContext) -> Vec<RecList> {
    let n = ctx.n_candidates();
    let s = ctx.list_size();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let items: Vec<ItemId> = idx.iter().map(|&i| ctx.candidates()[i]).collect();
        out.push(RecList::new(items, ctx).expect("combination is a valid list"));
        // Advance to the next combination; indices stay strictly rising.
        let mut i = s;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - s {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// The item sets of the true Pareto-optimal lists, found by evaluating the
/// full enumeration. Only sensible for small contexts.
pub fn enumerated_pareto_keys(ctx: &EvalContext) -> BTreeSet<Vec<ItemId>> {
    let mut eval = Evaluator::new(ctx);
    let mut lists = enumerate_lists(ctx);
    let objs: Vec<ObjectiveVector> =
        lists.iter_mut().map(|l| eval.evaluate(l).expect("toy list evaluates")).collect();
    let fronts = nondominated_sort(&objs);
    fronts[0].iter().map(|&i| lists[i].sorted_items()).collect()
}
