//! Load pick-up optimization for radial distribution networks.
//!
//! The crate assembles a piecewise-linearized DistFlow MILP ([`model`]), solves it
//! through a backend ([`solver`]), tightens the approximation bounds over repeated
//! solves ([`multistep`]) and checks the outcome against an exact power flow
//! ([`oracle`]).

pub mod fixtures;
pub mod io;
pub mod metrics;
pub mod model;
pub mod multistep;
pub mod network;
pub mod oracle;
pub mod pwl;
pub mod solver;

pub use metrics::{error_indices, ErrorIndices};
pub use model::{build_model, count_model, FeederBounds, MilpModel, ModelCounts};
pub use multistep::{run_multistep, RunReport, Termination};
pub use network::{validate_network, Bus, Feeder, Mode, Network, RunConfig};
pub use pwl::{pwl_eval, pwl_max_gap, PwlSpec};
pub use solver::{Backend, EnumerativeBackend, ExternalBackend, Solution, SolveStatus};
