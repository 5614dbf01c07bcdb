//! Money-exchange Markov chains on finite connected graphs.
//!
//! Agents sit on the vertices of a graph and hold whole dollars; at every
//! step one dollar moves across an edge. Two update rules are provided:
//!
//! * **model 1** picks an oriented edge uniformly, so every pair of
//!   neighbours is equally likely to trade. Its stationary law is uniform
//!   over configurations, and a single agent's wealth is approximately
//!   exponential with mean `T = M/N`.
//! * **model 2** picks a dollar uniformly, so agents spend in proportion to
//!   their wealth. Its stationary law is multinomial, with binomial
//!   marginals that become Poisson on large regular graphs.
//!
//! The crate has a fast simulator ([`dynamics`], [`simulation`]) and the
//! closed-form laws ([`exact_dist`]). It also has a brute-force exact
//! verifier for small instances ([`oracle`]) and goodness-of-fit tools
//! ([`stats`]).

mod combinatorics;
pub mod dynamics;
pub mod exact_dist;
pub mod graph;
pub mod oracle;
pub mod simulation;
pub mod state_space;
pub mod stats;

pub use combinatorics::{binomial, multinomial};
pub use dynamics::{
    replica_rng, run, step_model1, step_model2, transition_prob, ChainRng, ChainState, ModelKind,
    Observer, RunConfig,
};
pub use exact_dist::{DollarMarginal, NumericMode};
pub use graph::{generate, Graph, GraphError, GraphSpec, Vertex};
pub use oracle::{OracleReport, TransitionMatrix};
pub use simulation::{simulate, Estimator, SimulationOutput, SimulationPlan};
pub use state_space::{count_states, enumerate, rank, unrank, MoneyConfig, StateIndex};
pub use stats::{chi_square, tv_distance, Histogram, OccupationTime, VertexSelection};
