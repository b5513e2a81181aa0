//! Welfare-optimal screening contests.
//!
//! `n` agents with private types compete for `k` identical items by producing
//! costly signals. The crate computes the allocation/utility pair that
//! maximises a weighted sum of matching efficiency and agent utility, checks
//! incentive compatibility and interim feasibility, and compares the optimum
//! with the winner-takes-all contest and the VCG-format mechanism.

pub mod baselines;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod lp;
pub mod mechanism;
pub mod nonlinear;
pub mod numerics;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
