//! Horizon and timing analysis for stationary return processes.
//!
//! The crate separates three levels of description that are easy to
//! conflate when talking about investment risk:
//!
//! * pathwise statistics of one realization ([`stats`]),
//! * expectation-level risk and return, together with the dispersion of the
//!   pathwise statistics across realizations ([`analytic`]),
//! * empirical ensembles that estimate the same quantities by simulation or
//!   exact enumeration ([`montecarlo`]).
//!
//! Investment timing enters only through the cumulative exposure profile of a
//! [`Schedule`](exposure::Schedule).

pub mod analytic;
pub mod cli;
mod error;
pub mod exact;
pub mod exposure;
pub mod montecarlo;
pub mod process;
pub mod stats;
mod summation;

pub use error::{Error, Result};
pub use exposure::{ExposureMeasures, Schedule};
pub use process::{Moments, ProcessSpec};
