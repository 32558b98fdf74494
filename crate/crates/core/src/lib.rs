//! Change detection for quasi-seasonal telemetry with long-range
//! dependent noise.
//!
//! The pipeline: a maximum-likelihood polynomial filter tracks the seasonal
//! trend under fractional Brownian noise ([`trend`]), residuals are
//! standardized per window, a bank of weak sequential detectors scores them
//! ([`detectors`]), and a trainable logistic ensemble aggregates the bank
//! into a single alarm signal ([`ensemble`]). Supporting modules provide
//! exact fractional Gaussian noise simulation ([`fgn`]), Hurst estimation
//! ([`hurst`]), labeled scenario generation ([`change`]), classical
//! baselines ([`baselines`]), and evaluation metrics ([`evalkit`]).

pub mod baselines;
pub mod change;
pub mod detectors;
pub mod ensemble;
pub mod error;
pub mod evalkit;
pub mod fgn;
pub mod harness;
pub mod hurst;
pub mod persist;
pub mod rng;
pub mod series;
pub mod trend;

pub use error::{Error, Result};
pub use fgn::HurstExponent;
pub use series::TimeSeries;
