//! Experiment runner on top of `mcvd_core`.
//!
//! - [`config`]: experiment settings, `key = value` files and sweep expansion.
//! - [`ber`]: seeded, parallel Monte Carlo bit-error-rate runs.
//! - [`analytic`]: closed-form error probabilities of short messages.
//! - [`validate`]: particle-simulator cross-checks of the channel model.
//! - [`report`]: `ber.csv` and an SVG BER plot.

pub mod analytic;
pub mod ber;
pub mod config;
pub mod error;
pub mod report;
pub mod validate;

pub use ber::{run_ber, run_sweep, BerResult, Link};
pub use config::{ExperimentConfig, Scheme, Settings};
pub use error::{HarnessError, Result};
pub use report::emit_report;
