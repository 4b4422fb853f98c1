//! Simulation and planning engine for multi-crew power-network restoration.
//!
//! Crews traverse a road network to repair damaged power nodes; a policy
//! scores crew/target pairings, maximum-weight bipartite matching turns the
//! scores into conflict-free assignments, and performance is the energy
//! served to loads over a fixed horizon.

pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod evolve;
pub mod exact;
pub mod gen;
pub mod io;
pub mod matching;
pub mod net;
pub mod obs;
pub mod policy;
pub mod power;
pub mod rng;
pub mod routing;

pub use config::EpisodeConfig;
pub use env::{BudgetMode, EnvState, TargetRef};
pub use error::{Error, Result};
pub use net::{Scenario, SharedScenario};
