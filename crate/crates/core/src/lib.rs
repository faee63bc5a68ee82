//! Networked restless multi-armed bandits.
//!
//! Arms are nodes of an undirected contact graph. Every timestep a budget of
//! `k` arms is acted on, each arm transitions independently, and the active
//! arms then seed an independent cascade over the graph. The crate provides
//! the exact and sampled kernels, hill-climbing Bellman operators and their
//! meta-state decomposition, tabular learners, the usual baselines, a
//! Monte-Carlo experiment harness and an executable theory suite.

pub mod baselines;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod graph_model;
pub mod learning;
pub mod planning;
pub mod rng;
pub mod verify;

pub use dynamics::{ActionSet, CoinProfile, State};
pub use error::{NrmabError, Result};
pub use graph_model::{ArmDynamics, Edge, Instance};
