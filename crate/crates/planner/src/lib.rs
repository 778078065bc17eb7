//! Planning toolkit for upgrading legacy switches to SDN and deploying their
//! controllers under a shared budget.
//!
//! The pipeline is: parse a WAN topology ([`topology`]), derive a problem
//! instance with flow counts, a propagation-delay matrix and the objective
//! weights ([`instance`]), then solve it either exactly by LP-based
//! branch-and-bound ([`solver`]) or with the MapFirst / WeightFirst rounding
//! heuristics ([`heuristics`]). The [`sweep`] module drives whole parameter
//! sweeps and writes machine-readable results.

pub mod error;
pub mod heuristics;
pub mod instance;
pub mod lp;
pub mod par;
pub mod solver;
pub mod sweep;
pub mod topology;

pub use error::PlannerError;
pub use instance::{Plan, PlanMetrics, ProblemInstance};
pub use lp::{Formulation, LpProblem, LpSolution, LpStatus};
pub use solver::{SolveReport, SolveStatus};
pub use topology::{DistanceMatrix, FlowProfile, Topology};
