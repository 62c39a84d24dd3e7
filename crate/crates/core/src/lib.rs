//! Structural reliability toolkit.
//!
//! * [`form`]: first-order reliability method (HL-RF iteration).
//! * [`subset`]: subset simulation for small failure probabilities.
//! * [`mcs`]: crude Monte Carlo with standard errors, the reference estimator.
//! * [`field`]: 2D Gaussian random fields with separable exponential correlation.
//! * [`bayes`]: Gibbs sampling of a multivariate normal with missing data.
//!
//! Limit states are text expressions ([`limit_state`]); failure is `g(x) ≤ 0`.

pub mod bayes;
pub mod error;
pub mod exec;
pub mod field;
pub mod form;
pub mod limit_state;
pub mod mcs;
pub mod prob;
pub mod problem;
pub mod subset;

pub use error::{Error, Result};
pub use exec::Execution;
pub use problem::ReliabilityProblem;
