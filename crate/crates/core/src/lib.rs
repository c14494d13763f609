//! Power-line-communication cable monitoring by SNR forecasting.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the whole numerical
//! pipeline:
//!
//! * [`load`] generates time-varying termination impedances,
//! * [`emulator`] synthesizes per-subcarrier SNR panels for a tee network
//!   with optional cable faults,
//! * [`timeseries`] averages subcarriers into stabilizer batches and builds
//!   supervised windows,
//! * [`forecast`] fits one-step predictors (baseline, average, ARIMA,
//!   L2Boost, FFNN, LSTM),
//! * [`detector`] scores prediction-error vectors with the squared
//!   Mahalanobis distance and thresholds them with a chi-squared quantile,
//! * [`eval`] runs the benchmark, ROC, transfer and incipient-fault studies.
//!
//! File formats, configuration parsing and the command-line front end live
//! in the `plcwatch` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod detector;
pub mod emulator;
mod error;
pub mod eval;
pub mod forecast;
pub mod load;
pub mod numerics;
pub mod timeseries;

pub use error::{Error, Result};

/// Samples per day at the fixed 15-minute sampling period.
pub const SAMPLES_PER_DAY: usize = 96;

/// Sampling period in seconds.
pub const SAMPLE_PERIOD_S: u32 = 900;
