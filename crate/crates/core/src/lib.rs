//! Simulation and method-of-moments inference for two dynamic Erdős–Rényi
//! graphs observed through a hidden two-state regime process.
//!
//! The pieces, bottom-up:
//!
//! * [`distributions`]: duration laws (geometric, discrete Weibull, zeta) with
//!   their residual laws and mean inversion.
//! * [`subgraph_counts`]: exact edge, clique and star counts on a snapshot.
//! * [`graph_dynamics`]: the stationary discrete-time simulator.
//! * [`moments`]: closed-form single-snapshot and cross moments, plus a
//!   streaming accumulator for their empirical counterparts.
//! * [`estimator`]: the two-step moment solver and parameter recovery.
//! * [`harness`]: replicated experiments, reports and histogram data.

pub mod distributions;
pub mod estimator;
pub mod graph_dynamics;
pub mod harness;
pub mod moments;
pub mod solver;
pub mod subgraph_counts;

pub use distributions::{DistError, DistSpec, Family, ResidualView};
pub use estimator::{CaseConfig, EstimateError, EstimationResult};
pub use graph_dynamics::{ModelSpec, PreparedModel, StationaryProfile, SystemState};
pub use moments::{DynamicProfile, EmpiricalMoments, MomentAccumulator, MomentSpec};
pub use subgraph_counts::{AdjacencySnapshot, SubgraphKind};
