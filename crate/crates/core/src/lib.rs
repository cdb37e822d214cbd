//! Analysis toolkit for base-station sharing between mobile network operators.
//!
//! * [`stogeo`]: analytic SINR coverage, power/density trade-offs and areal power.
//! * [`ppp`]: Poisson point process Monte Carlo used to cross-check the analytics.
//! * [`buyer`]: the buyer's cost-minimising purchase (fractional knapsack).
//! * [`seller`]: sellers' Cournot competition over shared infrastructure.
//! * [`scenario`] and [`sweep`]: scenario files, unit conversion and CSV/JSON sweeps.

// negated comparisons double as NaN checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod buyer;
pub mod error;
pub mod ppp;
pub mod quad;
pub mod scenario;
pub mod seller;
pub mod stogeo;
pub mod sweep;

pub use error::{Error, Result};
