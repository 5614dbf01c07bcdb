//! Money configurations and the finite state space of all configurations
//! with a fixed number of dollars.
//!
//! States are ranked through the stars-and-bars bijection that sends a
//! configuration `(c_1, ..., c_N)` to the `(N-1)`-subset
//! `{c_1 + 1, c_1 + c_2 + 2, ..., c_1 + ... + c_{N-1} + N - 1}` of
//! `{1, ..., M + N - 1}`. Rank 0 is `(M, 0, ..., 0)`; ranks run in
//! decreasing lexicographic order of the subsets, which is the same as
//! decreasing lexicographic order of the count vectors.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::binomial;
use crate::graph::Vertex;

/// Default bound on the number of states an enumeration may produce.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "DOLLARWALK_ENUM_CAP";

/// Largest total supported; per-vertex counts are `u32`.
pub const MAX_TOTAL: u64 = (1 << 31) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("state space has {count} configurations, above the cap of {cap}")]
    SpaceTooLarge { count: BigUint, cap: u64 },
    #[error("state index {index} out of range (state space has {count} configurations)")]
    IndexOutOfRange { index: BigUint, count: BigUint },
    #[error("total of {0} dollars exceeds the supported maximum")]
    TotalTooLarge(u64),
    #[error("configuration needs at least one vertex")]
    Empty,
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Enumeration cap, honouring [`ENUM_CAP_ENV`] when set to an integer.
pub fn enumeration_cap() -> u64 {
    std::env::var(ENUM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Dollars held by each vertex. The total is fixed at construction.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MoneyConfig {
    counts: Vec<u32>,
    total: u64,
}

impl MoneyConfig {
    pub fn new(counts: Vec<u32>) -> Result<Self, StateError> {
        if counts.is_empty() {
            return Err(StateError::Empty);
        }
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total > MAX_TOTAL {
            return Err(StateError::TotalTooLarge(total));
        }
        Ok(MoneyConfig { counts, total })
    }

    /// Every vertex holds `each` dollars.
    pub fn equal(n: usize, each: u32) -> Result<Self, StateError> {
        Self::new(vec![each; n])
    }

    /// All `total` dollars sit on vertex `x`.
    pub fn all_at(n: usize, x: Vertex, total: u64) -> Result<Self, StateError> {
        if x as usize >= n {
            return Err(StateError::Invalid(format!(
                "vertex {x} out of range for {n} vertices"
            )));
        }
        if total > MAX_TOTAL {
            return Err(StateError::TotalTooLarge(total));
        }
        let mut counts = vec![0; n];
        counts[x as usize] = total as u32;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vertex_count(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn get(&self, x: Vertex) -> u32 {
        self.counts[x as usize]
    }

    /// Moves one dollar from `x` to `y` in place. Returns false, leaving
    /// the configuration untouched, when `x` is broke.
    #[inline]
    pub fn move_dollar(&mut self, x: Vertex, y: Vertex) -> bool {
        let cx = &mut self.counts[x as usize];
        if *cx == 0 {
            return false;
        }
        *cx -= 1;
        self.counts[y as usize] += 1;
        true
    }

    /// The configuration after a dollar move along `x -> y`; unchanged when
    /// `x` has no money.
    pub fn apply_move(&self, x: Vertex, y: Vertex) -> MoneyConfig {
        debug_assert_ne!(x, y);
        let mut next = self.clone();
        next.move_dollar(x, y);
        next
    }

    /// The configuration with one extra dollar at `x`.
    pub fn with_extra_dollar(&self, x: Vertex) -> MoneyConfig {
        let mut counts = self.counts.clone();
        counts[x as usize] += 1;
        MoneyConfig {
            counts,
            total: self.total + 1,
        }
    }

    /// The stars-and-bars subset of `{1, ..., M + N - 1}` (1-based, sorted).
    pub fn bars(&self) -> Vec<u64> {
        let n = self.counts.len();
        let mut running = 0u64;
        self.counts[..n - 1]
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                running += u64::from(c);
                running + i as u64 + 1
            })
            .collect()
    }

    /// Inverse of [`MoneyConfig::bars`].
    pub fn from_bars(n: usize, m: u64, bars: &[u64]) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::Empty);
        }
        if bars.len() != n - 1 {
            return Err(StateError::Invalid(format!(
                "expected {} bars, got {}",
                n - 1,
                bars.len()
            )));
        }
        let universe = m + n as u64 - 1;
        let mut counts = Vec::with_capacity(n);
        let mut prev = 0u64;
        for &b in bars {
            if b <= prev || b > universe {
                return Err(StateError::Invalid(format!("bars {bars:?} not increasing")));
            }
            counts.push((b - prev - 1) as u32);
            prev = b;
        }
        counts.push((universe - prev) as u32);
        Self::new(counts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.counts).expect("counts serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, StateError> {
        let counts: Vec<u32> =
            serde_json::from_str(text).map_err(|e| StateError::Invalid(e.to_string()))?;
        Self::new(counts)
    }
}

impl fmt::Debug for MoneyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.counts)
    }
}

impl Serialize for MoneyConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.counts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MoneyConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let counts = Vec::<u32>::deserialize(d)?;
        MoneyConfig::new(counts).map_err(serde::de::Error::custom)
    }
}

/// Position of a configuration in rank order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateIndex(pub BigUint);

impl StateIndex {
    pub fn to_usize(&self) -> Option<usize> {
        self.0.to_usize()
    }
}

impl From<usize> for StateIndex {
    fn from(i: usize) -> Self {
        StateIndex(BigUint::from(i))
    }
}

impl fmt::Display for StateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Number of configurations of `m` dollars on `n` vertices, `C(m+n-1, n-1)`.
pub fn count_states(n: usize, m: u64) -> BigUint {
    binomial(m as i64 + n as i64 - 1, n as i64 - 1)
}

/// Lexicographic index of a sorted `k`-subset of `{1, ..., universe}`.
fn subset_lex_rank(universe: u64, subset: &[u64]) -> BigUint {
    let k = subset.len() as i64;
    let u = universe as i64;
    let mut rank = BigUint::zero();
    let mut prev = 0i64;
    for (i, &a) in subset.iter().enumerate() {
        let a = a as i64;
        let r = k - i as i64 - 1;
        // Subsets agreeing so far whose next element j lies in (prev, a):
        // Σ_j C(u - j, r) collapses to a difference of two binomials.
        let lo = prev + 1;
        let hi = a - 1;
        if hi >= lo {
            rank += binomial(u - lo + 1, r + 1) - binomial(u - hi, r + 1);
        }
        prev = a;
    }
    rank
}

fn subset_lex_unrank(universe: u64, k: usize, mut rank: BigUint) -> Vec<u64> {
    let u = universe as i64;
    let mut subset = Vec::with_capacity(k);
    let mut prev = 0i64;
    for i in 0..k {
        let r = (k - i - 1) as i64;
        let start = prev + 1;
        // Subsets whose next element lies in [start, j) number
        // C(u - start + 1, r + 1) - C(u - j + 1, r + 1); find the smallest j
        // for which the count through j exceeds the remaining rank.
        let top = binomial(u - start + 1, r + 1);
        let target = &top - &rank;
        let (mut lo, mut hi) = (start, u - r);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if binomial(u - mid, r + 1) < target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        rank -= top - binomial(u - lo + 1, r + 1);
        subset.push(lo as u64);
        prev = lo;
    }
    subset
}

/// Rank of `c` in `[0, count_states(n, m))`.
pub fn rank(c: &MoneyConfig) -> StateIndex {
    let n = c.vertex_count();
    let m = c.total();
    let lex = subset_lex_rank(m + n as u64 - 1, &c.bars());
    StateIndex(count_states(n, m) - 1u32 - lex)
}

/// The configuration with the given rank.
pub fn unrank(index: &StateIndex, n: usize, m: u64) -> Result<MoneyConfig, StateError> {
    if n == 0 {
        return Err(StateError::Empty);
    }
    if m > MAX_TOTAL {
        return Err(StateError::TotalTooLarge(m));
    }
    let count = count_states(n, m);
    if index.0 >= count {
        return Err(StateError::IndexOutOfRange {
            index: index.0.clone(),
            count,
        });
    }
    let lex = count - 1u32 - &index.0;
    let bars = subset_lex_unrank(m + n as u64 - 1, n - 1, lex);
    MoneyConfig::from_bars(n, m, &bars)
}

/// All configurations of `m` dollars on `n` vertices, in rank order.
pub fn enumerate(n: usize, m: u64, cap: u64) -> Result<Enumeration, StateError> {
    if n == 0 {
        return Err(StateError::Empty);
    }
    if m > MAX_TOTAL {
        return Err(StateError::TotalTooLarge(m));
    }
    let count = count_states(n, m);
    if count > BigUint::from(cap) {
        return Err(StateError::SpaceTooLarge { count, cap });
    }
    let mut counts = vec![0u32; n];
    counts[0] = m as u32;
    Ok(Enumeration {
        next: Some(counts),
        total: m,
        remaining: count.to_usize().expect("bounded by cap"),
    })
}

/// Iterator returned by [`enumerate`].
#[derive(Debug, Clone)]
pub struct Enumeration {
    next: Option<Vec<u32>>,
    total: u64,
    remaining: usize,
}

impl Iterator for Enumeration {
    type Item = MoneyConfig;

    fn next(&mut self) -> Option<MoneyConfig> {
        let current = self.next.take()?;
        let n = current.len();
        // Successor in decreasing lexicographic order: take a dollar from the
        // rightmost non-last positive slot and put the whole tail right after it.
        if let Some(i) = (0..n - 1).rev().find(|&i| current[i] > 0) {
            let mut succ = current.clone();
            let tail: u32 = succ[i + 1..].iter().sum();
            succ[i] -= 1;
            succ[i + 1..].fill(0);
            succ[i + 1] = tail + 1;
            self.next = Some(succ);
        }
        self.remaining -= 1;
        Some(MoneyConfig {
            counts: current,
            total: self.total,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for Enumeration {}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn cfg(v: &[u32]) -> MoneyConfig {
        MoneyConfig::new(v.to_vec()).unwrap()
    }

    /// Every vector in {0..=m}^n summing to m, by exhaustive filtering.
    fn brute_force(n: usize, m: u32) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        loop {
            if cur.iter().sum::<u32>() == m {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                if cur[i] < m {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn counts_match_examples() {
        assert_eq!(count_states(2, 1), BigUint::from(2u32));
        assert_eq!(count_states(3, 2), BigUint::from(6u32));
        assert_eq!(count_states(2, 3), BigUint::from(4u32));
        assert_eq!(brute_force(3, 2).len(), 6);
        assert_eq!(brute_force(2, 3).len(), 4);
    }

    #[test]
    fn enumeration_examples() {
        let two: Vec<_> = enumerate(2, 2, DEFAULT_ENUM_CAP).unwrap().collect();
        assert_eq!(two, vec![cfg(&[2, 0]), cfg(&[1, 1]), cfg(&[0, 2])]);
        let one: Vec<_> = enumerate(1, 5, DEFAULT_ENUM_CAP).unwrap().collect();
        assert_eq!(one, vec![cfg(&[5])]);
        let zero: Vec<_> = enumerate(3, 0, DEFAULT_ENUM_CAP).unwrap().collect();
        assert_eq!(zero, vec![cfg(&[0, 0, 0])]);
    }

    #[test]
    fn enumeration_respects_cap() {
        assert!(matches!(
            enumerate(10, 10, 1000),
            Err(StateError::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn bars_example() {
        assert_eq!(cfg(&[1, 1, 0]).bars(), vec![2, 4]);
        assert_eq!(
            MoneyConfig::from_bars(3, 2, &[2, 4]).unwrap(),
            cfg(&[1, 1, 0])
        );
        assert!(MoneyConfig::from_bars(3, 2, &[4, 2]).is_err());
    }

    #[test]
    fn rank_examples() {
        let c = cfg(&[2, 0, 0]);
        assert_eq!(rank(&c), StateIndex::from(0));
        assert_eq!(unrank(&rank(&c), 3, 2).unwrap(), c);
        let a = rank(&cfg(&[1, 0])).to_usize().unwrap();
        let b = rank(&cfg(&[0, 1])).to_usize().unwrap();
        assert_eq!(BTreeSet::from([a, b]), BTreeSet::from([0, 1]));
        assert!(matches!(
            unrank(&StateIndex::from(6), 3, 2),
            Err(StateError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn enumeration_is_rank_order_and_complete() {
        for n in 1..=5 {
            for m in 0..=6u32 {
                let listed: Vec<_> = enumerate(n, m.into(), DEFAULT_ENUM_CAP).unwrap().collect();
                assert_eq!(BigUint::from(listed.len()), count_states(n, m.into()));
                for (i, c) in listed.iter().enumerate() {
                    assert_eq!(c.total(), u64::from(m));
                    assert_eq!(rank(c), StateIndex::from(i), "{c:?}");
                    assert_eq!(&unrank(&StateIndex::from(i), n, m.into()).unwrap(), c);
                }
                let as_set: BTreeSet<Vec<u32>> =
                    listed.iter().map(|c| c.counts().to_vec()).collect();
                let brute: BTreeSet<Vec<u32>> = brute_force(n, m).into_iter().collect();
                assert_eq!(as_set, brute, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn states_with_m_dollars_come_from_m_minus_one() {
        for n in 1..=4 {
            for m in 1..=5u64 {
                let built: BTreeSet<MoneyConfig> = enumerate(n, m - 1, DEFAULT_ENUM_CAP)
                    .unwrap()
                    .flat_map(|c| (0..n as Vertex).map(move |x| c.with_extra_dollar(x)))
                    .collect();
                let direct: BTreeSet<MoneyConfig> =
                    enumerate(n, m, DEFAULT_ENUM_CAP).unwrap().collect();
                assert_eq!(built, direct);
            }
        }
    }

    #[test]
    fn move_examples() {
        assert_eq!(cfg(&[1, 0]).apply_move(0, 1), cfg(&[0, 1]));
        assert_eq!(cfg(&[0, 1]).apply_move(0, 1), cfg(&[0, 1]));
        assert_eq!(cfg(&[2, 3, 0]).apply_move(1, 2), cfg(&[2, 2, 1]));
    }

    #[test]
    fn json_format() {
        let c = cfg(&[3, 0, 7]);
        assert_eq!(c.to_json(), "[3,0,7]");
        assert_eq!(MoneyConfig::from_json("[3,0,7]").unwrap(), c);
        assert!(MoneyConfig::from_json("[]").is_err());
        assert!(MoneyConfig::from_json("[-1]").is_err());
    }

    #[test]
    fn big_spaces_rank() {
        // C(5059, 59) is far beyond u64.
        let c = MoneyConfig::equal(60, 100).unwrap();
        let idx = rank(&c);
        assert!(idx.0.bits() > 64);
        assert_eq!(unrank(&idx, 60, 6000).unwrap(), c);
    }

    proptest! {
        #[test]
        fn moves_conserve_money(counts in prop::collection::vec(0u32..20, 2..8), x in 0usize..8, y in 0usize..8) {
            let n = counts.len();
            let (x, y) = (x % n, y % n);
            prop_assume!(x != y);
            let c = MoneyConfig::new(counts).unwrap();
            let next = c.apply_move(x as Vertex, y as Vertex);
            prop_assert_eq!(next.counts().iter().map(|&v| u64::from(v)).sum::<u64>(), c.total());
            prop_assert_eq!(next.total(), c.total());
        }

        #[test]
        fn rank_round_trips(counts in prop::collection::vec(0u32..40, 1..12)) {
            let c = MoneyConfig::new(counts).unwrap();
            let idx = rank(&c);
            prop_assert!(idx.0 < count_states(c.vertex_count(), c.total()));
            prop_assert_eq!(unrank(&idx, c.vertex_count(), c.total()).unwrap(), c);
        }
    }
}
