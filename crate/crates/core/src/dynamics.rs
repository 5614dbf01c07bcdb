//! The two money-exchange chains: single steps, long runs with observers,
//! and exact one-step transition probabilities.
//!
//! * [`ModelKind::EdgeUniform`] (model 1): pick an oriented edge `x -> y`
//!   uniformly among the `2|E|` orientations and move a dollar from `x` to
//!   `y` if `x` has one.
//! * [`ModelKind::DollarUniform`] (model 2): pick one of the `M` dollars
//!   uniformly and move it to a uniform neighbour of its holder.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Vertex};
use crate::state_space::MoneyConfig;

/// Generator driving every chain. Seedable, portable, and splittable into
/// independent streams.
pub type ChainRng = ChaCha8Rng;

/// The generator for replica `replica` of a run seeded with `seed`.
///
/// All replicas share the key derived from `seed` and differ in the ChaCha
/// stream id, so their outputs never overlap.
pub fn replica_rng(seed: u64, replica: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Model 1: uniform oriented edge.
    EdgeUniform,
    /// Model 2: uniform dollar, uniform neighbour.
    DollarUniform,
}

impl ModelKind {
    pub fn number(self) -> u8 {
        match self {
            ModelKind::EdgeUniform => 1,
            ModelKind::DollarUniform => 2,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "edge" | "edge-uniform" => Ok(ModelKind::EdgeUniform),
            "2" | "dollar" | "dollar-uniform" => Ok(ModelKind::DollarUniform),
            other => Err(format!("unknown model `{other}` (expected 1 or 2)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DynamicsError {
    #[error("configurations hold {0} and {1} dollars")]
    TotalMismatch(u64, u64),
    #[error("configuration has {config} vertices but the graph has {graph}")]
    SizeMismatch { config: usize, graph: usize },
}

/// A running trajectory of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    model: ModelKind,
    config: MoneyConfig,
    /// Holder of each one-dollar bill (model 2 only).
    bills: Vec<Vertex>,
    step: u64,
    rng: ChainRng,
}

impl ChainState {
    pub fn new(
        model: ModelKind,
        g: &Graph,
        initial: MoneyConfig,
        rng: ChainRng,
    ) -> Result<Self, DynamicsError> {
        if initial.vertex_count() != g.vertex_count() {
            return Err(DynamicsError::SizeMismatch {
                config: initial.vertex_count(),
                graph: g.vertex_count(),
            });
        }
        let bills = match model {
            ModelKind::EdgeUniform => Vec::new(),
            ModelKind::DollarUniform => initial
                .counts()
                .iter()
                .enumerate()
                .flat_map(|(x, &c)| std::iter::repeat_n(x as Vertex, c as usize))
                .collect(),
        };
        Ok(ChainState {
            model,
            config: initial,
            bills,
            step: 0,
            rng,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn config(&self) -> &MoneyConfig {
        &self.config
    }

    pub fn bills(&self) -> &[Vertex] {
        &self.bills
    }

    /// Number of transitions performed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Per-vertex bill tallies agree with the configuration.
    pub fn bills_consistent(&self) -> bool {
        if self.model == ModelKind::EdgeUniform {
            return self.bills.is_empty();
        }
        let mut tally = vec![0u32; self.config.vertex_count()];
        for &b in &self.bills {
            tally[b as usize] += 1;
        }
        tally == self.config.counts()
    }

    /// One transition of whichever model this chain runs. Returns the
    /// realized dollar move, if any.
    #[inline]
    pub fn step_once(&mut self, g: &Graph) -> Option<(Vertex, Vertex)> {
        match self.model {
            ModelKind::EdgeUniform => step_model1(self, g),
            ModelKind::DollarUniform => step_model2(self, g),
        }
    }

    /// Runs `steps` transitions, calling `observer.on_move` after each
    /// realized move and `observer.on_sample` at relative times
    /// `0, stride, 2*stride, ...` up to and including `steps`.
    pub fn advance<O: Observer + ?Sized>(
        &mut self,
        g: &Graph,
        steps: u64,
        stride: u64,
        observer: &mut O,
    ) {
        let stride = stride.max(1);
        observer.on_sample(self);
        match self.model {
            ModelKind::EdgeUniform => self.advance_with(g, steps, stride, observer, step_model1),
            ModelKind::DollarUniform => self.advance_with(g, steps, stride, observer, step_model2),
        }
    }

    #[inline(always)]
    fn advance_with<O: Observer + ?Sized>(
        &mut self,
        g: &Graph,
        steps: u64,
        stride: u64,
        observer: &mut O,
        step_fn: fn(&mut ChainState, &Graph) -> Option<(Vertex, Vertex)>,
    ) {
        let mut done = 0;
        while done < steps {
            let chunk = stride.min(steps - done);
            for _ in 0..chunk {
                if let Some((x, y)) = step_fn(self, g) {
                    observer.on_move(self.step, x, y, &self.config);
                }
            }
            done += chunk;
            if chunk == stride {
                observer.on_sample(self);
            }
        }
    }
}

/// Callbacks invoked from inside a run.
pub trait Observer {
    /// A dollar just moved `from -> to`; `step` counts transitions so far,
    /// so `config` is the state at time `step`.
    #[inline]
    fn on_move(&mut self, _step: u64, _from: Vertex, _to: Vertex, _config: &MoneyConfig) {}

    /// Periodic snapshot hook.
    #[inline]
    fn on_sample(&mut self, _state: &ChainState) {}

    /// Called once when the run ends.
    fn finish(&mut self, _state: &ChainState) {}
}

/// Observer that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl Observer for NoObserver {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    #[inline]
    fn on_move(&mut self, step: u64, from: Vertex, to: Vertex, config: &MoneyConfig) {
        self.0.on_move(step, from, to, config);
        self.1.on_move(step, from, to, config);
    }

    fn on_sample(&mut self, state: &ChainState) {
        self.0.on_sample(state);
        self.1.on_sample(state);
    }

    fn finish(&mut self, state: &ChainState) {
        self.0.finish(state);
        self.1.finish(state);
    }
}

impl Observer for [Box<dyn Observer + '_>] {
    fn on_move(&mut self, step: u64, from: Vertex, to: Vertex, config: &MoneyConfig) {
        for o in self.iter_mut() {
            o.on_move(step, from, to, config);
        }
    }

    fn on_sample(&mut self, state: &ChainState) {
        for o in self.iter_mut() {
            o.on_sample(state);
        }
    }

    fn finish(&mut self, state: &ChainState) {
        for o in self.iter_mut() {
            o.finish(state);
        }
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    #[inline]
    fn on_move(&mut self, step: u64, from: Vertex, to: Vertex, config: &MoneyConfig) {
        (**self).on_move(step, from, to, config);
    }

    fn on_sample(&mut self, state: &ChainState) {
        (**self).on_sample(state);
    }

    fn finish(&mut self, state: &ChainState) {
        (**self).finish(state);
    }
}

/// Uniform neighbour of `x`.
#[inline(always)]
fn uniform_neighbor(rng: &mut ChainRng, g: &Graph, x: Vertex) -> Vertex {
    if g.is_complete() {
        let y = rng.random_range(0..g.vertex_count() as u32 - 1);
        y + u32::from(y >= x)
    } else {
        let nbrs = g.neighbors(x);
        nbrs[rng.random_range(0..nbrs.len())]
    }
}

/// One model-1 transition: a uniform oriented edge `x -> y`, then a dollar
/// move if `x` is not broke.
#[inline]
pub fn step_model1(s: &mut ChainState, g: &Graph) -> Option<(Vertex, Vertex)> {
    s.step += 1;
    let (x, y) = if g.is_complete() {
        // Uniform ordered pair of distinct vertices.
        let n = g.vertex_count() as u32;
        let x = s.rng.random_range(0..n);
        (x, uniform_neighbor(&mut s.rng, g, x))
    } else {
        let k = s.rng.random_range(0..2 * g.edge_count());
        let (u, v) = g.edges()[k >> 1];
        if k & 1 == 0 {
            (u, v)
        } else {
            (v, u)
        }
    };
    s.config.move_dollar(x, y).then_some((x, y))
}

/// One model-2 transition: a uniform bill jumps to a uniform neighbour of
/// its holder. With no money at all the chain stays put.
#[inline]
pub fn step_model2(s: &mut ChainState, g: &Graph) -> Option<(Vertex, Vertex)> {
    s.step += 1;
    if s.bills.is_empty() {
        return None;
    }
    let b = s.rng.random_range(0..s.bills.len());
    let x = s.bills[b];
    let y = uniform_neighbor(&mut s.rng, g, x);
    s.bills[b] = y;
    let moved = s.config.move_dollar(x, y);
    debug_assert!(moved);
    Some((x, y))
}

/// Length and duration of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub steps: u64,
    /// Observer sampling stride; `None` means one sweep of `N * M` steps.
    pub stride: Option<u64>,
}

/// One full sweep, `N * M` steps (at least 1).
pub fn default_stride(n: usize, m: u64) -> u64 {
    (n as u64 * m).max(1)
}

/// Runs a chain from `initial` and returns its final state. Deterministic
/// in `(model, g, initial, run, rng)`.
pub fn run<O: Observer + ?Sized>(
    model: ModelKind,
    g: &Graph,
    initial: MoneyConfig,
    run: RunConfig,
    rng: ChainRng,
    observer: &mut O,
) -> Result<ChainState, DynamicsError> {
    let stride = run
        .stride
        .unwrap_or_else(|| default_stride(g.vertex_count(), initial.total()));
    let mut state = ChainState::new(model, g, initial, rng)?;
    state.advance(g, run.steps, stride, observer);
    observer.finish(&state);
    Ok(state)
}

/// The vertices `(x, y)` with `to = from` minus a dollar at `x` plus one at
/// `y`, if the two configurations differ by exactly one such move.
fn single_move(from: &MoneyConfig, to: &MoneyConfig) -> Option<(Vertex, Vertex)> {
    let mut source = None;
    let mut target = None;
    for (z, (&a, &b)) in from.counts().iter().zip(to.counts()).enumerate() {
        match i64::from(b) - i64::from(a) {
            0 => {}
            -1 if source.is_none() => source = Some(z as Vertex),
            1 if target.is_none() => target = Some(z as Vertex),
            _ => return None,
        }
    }
    source.zip(target)
}

/// Exact one-step probability `p(from, to)` of the given model on `g`.
pub fn transition_prob(
    model: ModelKind,
    g: &Graph,
    from: &MoneyConfig,
    to: &MoneyConfig,
) -> Result<BigRational, DynamicsError> {
    for c in [from, to] {
        if c.vertex_count() != g.vertex_count() {
            return Err(DynamicsError::SizeMismatch {
                config: c.vertex_count(),
                graph: g.vertex_count(),
            });
        }
    }
    if from.total() != to.total() {
        return Err(DynamicsError::TotalMismatch(from.total(), to.total()));
    }
    let ratio = |num: u64, den: u64| BigRational::new(BigInt::from(num), BigInt::from(den));
    let oriented = 2 * g.edge_count() as u64;
    let m = from.total();

    if from == to {
        return Ok(match model {
            // Oriented edges leaving a broke vertex leave the state alone.
            ModelKind::EdgeUniform => {
                let idle: u64 = (0..g.vertex_count() as Vertex)
                    .filter(|&z| from.get(z) == 0)
                    .map(|z| g.degree(z) as u64)
                    .sum();
                ratio(idle, oriented)
            }
            ModelKind::DollarUniform if m == 0 => BigRational::one(),
            ModelKind::DollarUniform => BigRational::zero(),
        });
    }
    let Some((x, y)) = single_move(from, to) else {
        return Ok(BigRational::zero());
    };
    if !g.has_edge(x, y) {
        return Ok(BigRational::zero());
    }
    Ok(match model {
        ModelKind::EdgeUniform => ratio(1, oriented),
        ModelKind::DollarUniform => ratio(u64::from(from.get(x)), m * g.degree(x) as u64),
    })
}
