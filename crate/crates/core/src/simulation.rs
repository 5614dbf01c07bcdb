//! Replica-parallel simulation runs producing merged marginal histograms.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    default_stride, replica_rng, ChainState, DynamicsError, ModelKind, NoObserver,
};
use crate::graph::Graph;
use crate::state_space::MoneyConfig;
use crate::stats::{Histogram, OccupationTime, SnapshotHistogram, VertexSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Counts at widely spaced sampling instants.
    Snapshot,
    /// Fraction of all post-burn-in steps spent at each amount.
    TimeAverage,
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snapshot" => Ok(Estimator::Snapshot),
            "time-average" => Ok(Estimator::TimeAverage),
            other => Err(format!(
                "unknown estimator `{other}` (expected snapshot or time-average)"
            )),
        }
    }
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Snapshot => "snapshot",
            Estimator::TimeAverage => "time-average",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulationError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("pooling across vertices needs a vertex-transitive graph")]
    PoolingNotAllowed,
    #[error("vertex {0} is not in the graph")]
    NoSuchVertex(u32),
    #[error("at least one replica is required")]
    NoReplicas,
}

/// Everything that determines a run besides the graph and initial state.
/// `None` fields resolve to sweep-scaled defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationPlan {
    pub model: ModelKind,
    pub steps: u64,
    /// Default `10 * N * M`.
    pub burn_in: Option<u64>,
    /// Default `N * M`.
    pub stride: Option<u64>,
    pub replicas: u64,
    pub seed: u64,
    pub estimator: Estimator,
    /// Default: pool on vertex-transitive graphs, vertex 0 otherwise.
    pub vertices: Option<VertexSelection>,
}

impl SimulationPlan {
    pub fn new(model: ModelKind, steps: u64, seed: u64) -> Self {
        SimulationPlan {
            model,
            steps,
            burn_in: None,
            stride: None,
            replicas: 1,
            seed,
            estimator: Estimator::Snapshot,
            vertices: None,
        }
    }
}

/// Default burn-in, ten sweeps.
pub fn default_burn_in(n: usize, m: u64) -> u64 {
    10 * n as u64 * m
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub histogram: Histogram,
    pub burn_in: u64,
    pub stride: u64,
    pub vertices: VertexSelection,
    /// Final configuration of each replica, in replica order.
    pub finals: Vec<MoneyConfig>,
}

impl SimulationOutput {
    pub fn pooled(&self) -> bool {
        self.vertices == VertexSelection::All
    }
}

/// Runs `plan.replicas` independent chains and merges their histograms in
/// replica order. Output is a function of the arguments alone.
pub fn simulate(
    g: &Graph,
    initial: &MoneyConfig,
    plan: &SimulationPlan,
) -> Result<SimulationOutput, SimulationError> {
    if plan.replicas == 0 {
        return Err(SimulationError::NoReplicas);
    }
    let n = g.vertex_count();
    let m = initial.total();
    let vertices = match plan.vertices {
        Some(VertexSelection::All) if !g.is_vertex_transitive() => {
            return Err(SimulationError::PoolingNotAllowed)
        }
        Some(VertexSelection::One(x)) if x as usize >= n => {
            return Err(SimulationError::NoSuchVertex(x))
        }
        Some(sel) => sel,
        None if g.is_vertex_transitive() => VertexSelection::All,
        None => VertexSelection::One(0),
    };
    let burn_in = plan.burn_in.unwrap_or_else(|| default_burn_in(n, m));
    let stride = plan.stride.unwrap_or_else(|| default_stride(n, m)).max(1);
    // Validate once up front so replicas cannot fail.
    ChainState::new(plan.model, g, initial.clone(), replica_rng(plan.seed, 0))?;

    let results: Vec<(Histogram, MoneyConfig)> = (0..plan.replicas)
        .into_par_iter()
        .map(|r| {
            let rng = replica_rng(plan.seed, r);
            let mut state =
                ChainState::new(plan.model, g, initial.clone(), rng).expect("validated above");
            state.advance(g, burn_in, burn_in.max(1), &mut NoObserver);
            let histogram = match plan.estimator {
                Estimator::Snapshot => {
                    let mut snap = SnapshotHistogram::new(vertices);
                    state.advance(g, plan.steps, stride, &mut snap);
                    snap.histogram
                }
                Estimator::TimeAverage => {
                    let mut occ = OccupationTime::new(vertices, state.config(), state.step());
                    state.advance(g, plan.steps, plan.steps.max(1), &mut occ);
                    occ.histogram_at(state.step())
                }
            };
            (histogram, state.config().clone())
        })
        .collect();

    let mut histogram = Histogram::new();
    let mut finals = Vec::with_capacity(results.len());
    for (h, c) in results {
        histogram.merge(&h);
        finals.push(c);
    }
    Ok(SimulationOutput {
        histogram,
        burn_in,
        stride,
        vertices,
        finals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;

    #[test]
    fn steps_zero_snapshots_initial_state() {
        let g = GraphSpec::Complete(5).build().unwrap();
        let init = MoneyConfig::new(vec![1, 2, 3, 0, 4]).unwrap();
        let mut plan = SimulationPlan::new(ModelKind::EdgeUniform, 0, 1);
        plan.burn_in = Some(0);
        let out = simulate(&g, &init, &plan).unwrap();
        assert_eq!(out.histogram, Histogram::of_config(&init));
        assert!(out.pooled());
    }

    #[test]
    fn replicas_merge_and_are_reproducible() {
        let g = GraphSpec::Cycle(6).build().unwrap();
        let init = MoneyConfig::equal(6, 3).unwrap();
        let mut plan = SimulationPlan::new(ModelKind::DollarUniform, 10_800, 4);
        plan.replicas = 3;
        let a = simulate(&g, &init, &plan).unwrap();
        let b = simulate(&g, &init, &plan).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.finals, b.finals);
        assert_eq!(a.burn_in, 1080);
        assert_eq!(a.stride, 108);
        // 101 snapshots x 6 vertices x 3 replicas.
        assert_eq!(a.histogram.total(), 101 * 6 * 3);
        let mut single = plan.clone();
        single.replicas = 1;
        let one = simulate(&g, &init, &single).unwrap();
        assert_eq!(one.histogram.total(), 101 * 6);
        assert_eq!(one.finals[0], a.finals[0]);
    }

    #[test]
    fn pooling_rules() {
        let star = GraphSpec::Star(4).build().unwrap();
        let init = MoneyConfig::equal(4, 2).unwrap();
        let mut plan = SimulationPlan::new(ModelKind::EdgeUniform, 10, 0);
        let out = simulate(&star, &init, &plan).unwrap();
        assert_eq!(out.vertices, VertexSelection::One(0));
        plan.vertices = Some(VertexSelection::All);
        assert_eq!(
            simulate(&star, &init, &plan).unwrap_err(),
            SimulationError::PoolingNotAllowed
        );
        plan.vertices = Some(VertexSelection::One(9));
        assert_eq!(
            simulate(&star, &init, &plan).unwrap_err(),
            SimulationError::NoSuchVertex(9)
        );
    }

    #[test]
    fn time_average_weights() {
        let g = GraphSpec::Complete(4).build().unwrap();
        let init = MoneyConfig::equal(4, 2).unwrap();
        let mut plan = SimulationPlan::new(ModelKind::DollarUniform, 1000, 2);
        plan.estimator = Estimator::TimeAverage;
        plan.burn_in = Some(50);
        let out = simulate(&g, &init, &plan).unwrap();
        assert_eq!(out.histogram.total(), 4 * 1000);
    }
}
