//! Penalty-free variational solver for the travelling salesman problem.
//!
//! The pipeline: a parametrized device (a simulated shallow quantum circuit
//! or a quantum-inspired classical model) samples bit strings, a penalty-free
//! codec maps every bit string to a valid tour, a cached cost engine turns
//! tours into distances, and a stochastic optimizer (SPSA or parameter shift)
//! closes the feedback loop. Monte Carlo, greedy and brute-force references
//! plus an experiment harness make the results comparable.

pub mod bench;
pub mod codec;
pub mod cost;
pub mod qsim;
pub mod defaults;
pub mod error;
pub mod ml;
pub mod optimizer;
pub(crate) mod util;
pub mod tsp;

pub use error::{Error, Result};
