//! Statistical aggregation laboratory.
//!
//! Exponential weights, Q-aggregation, the progressive mixture rule and a
//! family of ridge-type predictors, together with global and local entropic
//! complexities and a seeded Monte Carlo harness that checks localized risk
//! bounds on small synthetic problems.
//!
//! Probability weights over a finite parameter set live in log space
//! ([`SimplexWeights`]); matrices use `nalgebra`.

#![forbid(unsafe_code)]

pub mod cli;
pub mod complexity;
pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod harness;
pub mod numeric;
pub mod ridge;
pub mod simplex;
pub mod vcclass;

pub use error::{Error, Result};
pub use simplex::{ScoreVector, SimplexWeights};
