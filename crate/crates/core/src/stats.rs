//! Empirical estimators of the dollar marginals and goodness-of-fit
//! measures against the exact laws.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{ChainState, Observer};
use crate::graph::Vertex;
use crate::state_space::MoneyConfig;

/// Tolerance on `|Σ p - 1|` accepted by [`tv_distance`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Smallest expected count per chi-square bucket.
pub const MIN_EXPECTED_PER_BUCKET: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("need at least two buckets with expected count >= 5, got {0}")]
    InsufficientSamples(usize),
}

/// Counts (or vertex-step weights) per dollar amount.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Histogram of the per-vertex counts of one configuration.
    pub fn of_config(config: &MoneyConfig) -> Self {
        let mut h = Self::new();
        for &c in config.counts() {
            h.record(c as usize);
        }
        h
    }

    #[inline]
    pub fn record(&mut self, d: usize) {
        self.record_weight(d, 1);
    }

    #[inline]
    pub fn record_weight(&mut self, d: usize, weight: u64) {
        if d >= self.counts.len() {
            self.counts.resize(d + 1, 0);
        }
        self.counts[d] += weight;
        self.total += weight;
    }

    pub fn get(&self, d: usize) -> u64 {
        self.counts.get(d).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// One past the largest recorded amount.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Pointwise sum.
    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn merged(mut self, other: &Histogram) -> Histogram {
        self.merge(other);
        self
    }

    /// Empirical probabilities; empty for an empty histogram.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.total == 0 {
            return Vec::new();
        }
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn fraction(&self, d: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.get(d) as f64 / self.total as f64
        }
    }
}

/// Which vertices an estimator watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexSelection {
    /// Pool every vertex (only meaningful on vertex-transitive graphs).
    All,
    One(Vertex),
}

impl VertexSelection {
    #[inline]
    fn contains(self, x: Vertex) -> bool {
        match self {
            VertexSelection::All => true,
            VertexSelection::One(v) => v == x,
        }
    }

    fn size(self, n: usize) -> u64 {
        match self {
            VertexSelection::All => n as u64,
            VertexSelection::One(_) => 1,
        }
    }
}

/// Records the watched vertices' dollar counts at every sampling instant.
#[derive(Debug, Clone)]
pub struct SnapshotHistogram {
    pub vertices: VertexSelection,
    pub histogram: Histogram,
    pub snapshots: u64,
}

impl SnapshotHistogram {
    pub fn new(vertices: VertexSelection) -> Self {
        SnapshotHistogram {
            vertices,
            histogram: Histogram::new(),
            snapshots: 0,
        }
    }

    pub fn record_config(&mut self, config: &MoneyConfig) {
        match self.vertices {
            VertexSelection::All => {
                for &c in config.counts() {
                    self.histogram.record(c as usize);
                }
            }
            VertexSelection::One(x) => self.histogram.record(config.get(x) as usize),
        }
        self.snapshots += 1;
    }
}

impl Observer for SnapshotHistogram {
    fn on_sample(&mut self, state: &ChainState) {
        self.record_config(state.config());
    }
}

/// Time-average estimator: for each watched vertex and amount `d`, the
/// number of time steps `s` in `[start, now)` with `ξ_s(x) = d`.
///
/// Updated only when a watched vertex's count changes, so it is exact over
/// every step at O(1) cost per move.
#[derive(Debug, Clone)]
pub struct OccupationTime {
    vertices: VertexSelection,
    start: u64,
    /// Time at which each vertex's current count began.
    since: Vec<u64>,
    current: Vec<u32>,
    closed: Histogram,
}

impl OccupationTime {
    /// Starts accumulating at time `start` from configuration `config`.
    pub fn new(vertices: VertexSelection, config: &MoneyConfig, start: u64) -> Self {
        OccupationTime {
            vertices,
            start,
            since: vec![start; config.vertex_count()],
            current: config.counts().to_vec(),
            closed: Histogram::new(),
        }
    }

    #[inline]
    fn close(&mut self, x: Vertex, now: u64, new_count: u32) {
        let i = x as usize;
        let held = now - self.since[i];
        if held > 0 {
            self.closed.record_weight(self.current[i] as usize, held);
        }
        self.since[i] = now;
        self.current[i] = new_count;
    }

    /// Occupation weights over `[start, now)`, pooled over watched vertices.
    /// Its total is `(now - start)` times the number of watched vertices.
    pub fn histogram_at(&self, now: u64) -> Histogram {
        let mut h = self.closed.clone();
        for (x, (&since, &c)) in self.since.iter().zip(&self.current).enumerate() {
            if self.vertices.contains(x as Vertex) && now > since {
                h.record_weight(c as usize, now - since);
            }
        }
        h
    }

    /// `(1/t) Σ_{s} 1{ξ_s(x) = d}` over the elapsed window, pooled.
    pub fn fraction(&self, d: usize, now: u64) -> f64 {
        self.histogram_at(now).fraction(d)
    }

    pub fn elapsed(&self, now: u64) -> u64 {
        now - self.start
    }

    pub fn vertex_count(&self) -> u64 {
        self.vertices.size(self.since.len())
    }
}

impl Observer for OccupationTime {
    #[inline]
    fn on_move(&mut self, step: u64, from: Vertex, to: Vertex, config: &MoneyConfig) {
        if self.vertices.contains(from) {
            self.close(from, step, config.get(from));
        }
        if self.vertices.contains(to) {
            self.close(to, step, config.get(to));
        }
    }
}

fn check_normalized(p: &[f64]) -> Result<(), StatsError> {
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(StatsError::NotNormalized(s));
    }
    Ok(())
}

/// Total variation distance `½ Σ_d |p(d) - q(d)|`; the shorter vector is
/// padded with zeros.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    check_normalized(p)?;
    check_normalized(q)?;
    let len = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let l1: f64 = (0..len).map(|i| (at(p, i) - at(q, i)).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    /// Inclusive range of dollar amounts.
    pub lo: usize,
    pub hi: usize,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub buckets: Vec<Bucket>,
}

/// Pearson goodness of fit of `h` against `expected`, merging consecutive
/// amounts until each bucket expects at least five samples. A short final
/// run is folded into the previous bucket; observations beyond the end of
/// `expected` land in the last bucket.
pub fn chi_square(h: &Histogram, expected: &[f64]) -> Result<ChiSquare, StatsError> {
    let n = h.total() as f64;
    let mut buckets: Vec<Bucket> = Vec::new();
    let mut open: Option<Bucket> = None;
    for (d, &e) in expected.iter().enumerate() {
        let b = open.get_or_insert(Bucket {
            lo: d,
            hi: d,
            observed: 0,
            expected: 0.0,
        });
        b.hi = d;
        b.observed += h.get(d);
        b.expected += n * e;
        if b.expected >= MIN_EXPECTED_PER_BUCKET {
            buckets.push(open.take().unwrap());
        }
    }
    let overflow: u64 = h.counts().iter().skip(expected.len()).sum();
    match (open, buckets.last_mut()) {
        (Some(rest), Some(last)) => {
            last.hi = rest.hi;
            last.observed += rest.observed;
            last.expected += rest.expected;
        }
        (Some(rest), None) => buckets.push(rest),
        _ => {}
    }
    if let Some(last) = buckets.last_mut() {
        last.observed += overflow;
        last.hi = last.hi.max(h.len().saturating_sub(1));
    }
    if buckets.len() < 2 || buckets.iter().any(|b| b.expected < MIN_EXPECTED_PER_BUCKET) {
        return Err(StatsError::InsufficientSamples(
            buckets
                .iter()
                .filter(|b| b.expected >= MIN_EXPECTED_PER_BUCKET)
                .count(),
        ));
    }
    let statistic = buckets
        .iter()
        .map(|b| {
            let diff = b.observed as f64 - b.expected;
            diff * diff / b.expected
        })
        .sum();
    Ok(ChiSquare {
        statistic,
        dof: buckets.len() - 1,
        buckets,
    })
}

/// Inverse-CDF sampler for a distribution over `0..len`.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        InverseCdf { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(0.0);
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

/// Metadata block written next to every simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub model: u8,
    pub graph: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub initial: String,
    pub estimator: String,
    pub steps: u64,
    pub burn_in: u64,
    pub stride: u64,
    pub replicas: u64,
    pub seed: u64,
    pub pooled: bool,
    pub vertex: Option<Vertex>,
    pub samples: u64,
}

impl RunMetadata {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

/// CSV of a histogram: `d,count,empirical_probability`.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("d,count,empirical_probability\n");
    for d in 0..h.len() {
        writeln!(out, "{},{},{}", d, h.get(d), h.fraction(d)).unwrap();
    }
    out
}

/// Figure overlay CSV: `d,empirical_probability,exact_marginal,limit_curve`
/// for `d = 0..rows`.
pub fn figure_csv(h: &Histogram, exact: &[f64], limit: &[f64], rows: usize) -> String {
    let mut out = String::from("d,empirical_probability,exact_marginal,limit_curve\n");
    let at = |v: &[f64], d: usize| v.get(d).copied().unwrap_or(0.0);
    for d in 0..rows {
        writeln!(
            out,
            "{},{},{},{}",
            d,
            h.fraction(d),
            at(exact, d),
            at(limit, d)
        )
        .unwrap();
    }
    out
}
