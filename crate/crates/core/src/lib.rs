//! Penalized maximum likelihood estimation for finite mixtures of univariate
//! location-scale densities.
//!
//! The unpenalized likelihood of a location-scale mixture is unbounded: put
//! one component on a data point and shrink its scale and the likelihood goes
//! to infinity. This crate multiplies the likelihood by a reward that vanishes
//! on those degenerate configurations, in one of two forms:
//!
//! - a reward depending only on the ratio `min σ / max σ` of the scales
//!   ([`penalties::SmoothRatio`], and its indicator form [`penalties::HardRatio`]);
//! - a separable reward `∏ s̄(σ_m)` on the scales themselves
//!   ([`penalties::ScalePenalty`], the inverse-gamma shaped family).
//!
//! Alongside the estimator it provides grid-based checkers for the conditions
//! those rewards have to satisfy, a brute-force grid oracle for tiny
//! instances, and a Monte Carlo harness for consistency studies.
//!
//! The crate is `no_std` and only needs `alloc`. IO, timing and parallel
//! execution live in the `penmix` companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is how NaN gets rejected alongside the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod families;
pub mod math;
pub mod oracle;
pub mod penalties;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{fit, penalized_objective, FitConfig, FitResult, FitStatus, Optimizer};
pub use families::{ComponentParams, FamilyKind, FamilySpec, MixtureParams, ScaleOrderStats};
pub use penalties::{PenaltySpec, Regime, Schedules};
