//! Byzantine-resilient distributed state estimation for discrete-time LTI
//! systems monitored by a directed sensor network.
//!
//! The pipeline: a real block-diagonalizing similarity transform splits the
//! plant into eigenvalue blocks; per-node PBH tests classify blocks as locally
//! detectable or not; a round protocol builds a mode-estimation DAG (MEDAG)
//! per undetectable unstable block; each node then runs a local Luenberger
//! observer on its detectable subspace and a trimmed-mean consensus filter on
//! the rest. Feasibility of a network is checked through bootstrap
//! percolation, and random network generators allow probabilistic studies.

pub mod adversary;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod medag;
pub mod netgen;
pub mod plant;
pub mod presets;
pub mod simulator;
pub mod spectral;

pub use error::Error;

/// Internal 0-based node identifier.
pub type NodeId = usize;
