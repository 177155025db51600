//! Federated tabular reinforcement learning across environments that share
//! states, actions, rewards and discount but differ in their dynamics.
//!
//! * [`mdp`]: exact single-MDP dynamic programming and policy gradients.
//! * [`env`]: federated task construction, the averaged ("imaginary")
//!   environment and heterogeneity measures.
//! * [`algo`]: QAvg, ProjPAvg and SoftPAvg training loops plus the
//!   no-communication baseline.
//! * [`harness`]: seeded experiment sweeps, summaries and CSV persistence.
//! * [`checks`]: numerical property suites (value bounds, convergence bound,
//!   gradient finite differences, initial-distribution dependence).

pub mod algo;
pub mod checks;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};
