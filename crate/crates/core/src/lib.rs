//! Simulator and exact pairwise privacy accountant for differentially
//! private gossip averaging and decentralized gradient descent.
//!
//! The crate is organized around five pieces:
//!
//! - [`graph`]: communication topologies (hypercube, Erdős–Rényi, ring,
//!   grid, torus, complete, geometric) plus edge-list ingestion and BFS.
//! - [`gossip`]: gossip matrices with spectral gaps, Chebyshev-accelerated
//!   synchronous averaging, randomized pairwise averaging, and time-varying
//!   schedules (including node-dropout models), all with Gaussian input
//!   noise.
//! - [`privacy`]: the exact per-pair accountant for what each node's view
//!   leaks about every other node's input, plus closed-form bounds
//!   (random-walk, random-graph), collusion/group variants, and Rényi-to-DP
//!   conversion.
//! - [`optim`]: decentralized (stochastic) gradient descent for regularized
//!   logistic regression with integrated accounting, and a trusted
//!   aggregator baseline.
//! - [`data_io`]: CSV ingestion, normalization, partitioning, and atomic
//!   result persistence.
//!
//! Everything stochastic takes an explicit seed and is bit-reproducible.

pub mod data_io;
pub mod error;
pub mod graph;
pub mod gossip;
pub mod optim;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
