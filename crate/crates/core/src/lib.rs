//! Bayesian basket-trial designs that borrow response information across
//! cancer types through a unit-information prior, together with three
//! comparator models and a Monte Carlo harness for calibrating decision
//! cutoffs and measuring operating characteristics.
//!
//! Module layout, bottom-up:
//!
//! * [`numcore`] special functions, beta distribution routines, quadrature
//!   and reproducible random streams.
//! * [`divergence`] divergences between beta posteriors and the weights
//!   derived from them.
//! * [`uip`] unit-information prior construction and effective sample size.
//! * [`engines`] posterior inference for the six models and the efficacy rule.
//! * [`harness`] trial simulation, cutoff calibration and operating
//!   characteristics.

pub mod divergence;
pub mod engines;
mod error;
pub mod harness;
pub mod numcore;
pub mod uip;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
