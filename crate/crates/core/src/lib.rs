//! Local coordination on networks.
//!
//! This crate builds and checks the objects that relate coordination games on
//! graphs to graph amenability:
//!
//! - [`graph`]: finite simple graphs, the example families (cycles, tori,
//!   binary trees, Erdős–Rényi graphs) and metric primitives.
//! - [`partition`]: `(ε, r)`-amenability certificates, explicit tilings,
//!   a greedy carver and stable-community peeling.
//! - [`equilibrium`]: leader-equilibrium simulators and exact inefficiency
//!   values, including the locally-transitive tile-selection construction.
//! - [`influence`]: Shapley influence distributions of functions of
//!   independent inputs, via the variance game and its Harsanyi dividends.
//! - [`certify`]: the exponential-race grand coupling and the pipeline that
//!   turns a low-inefficiency local profile into a random certificate.
//!
//! All randomness is explicit: every stochastic routine takes a `u64` seed and
//! derives per-trial streams from it (see [`rng`]).

pub mod certify;
pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod influence;
pub mod partition;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{EdgeSet, Graph, Layout, VertexSet};
pub use partition::{PartitionCertificate, StablePartition};
pub use stats::MonteCarloStats;
