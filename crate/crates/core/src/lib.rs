//! Coverage and expected length of confidence intervals for the slope of a
//! random-intercept panel model after a Hausman pretest.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod bvn;
pub mod calibration;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod exact_law;
pub mod mc;
pub mod normal;
pub mod pretest;
pub mod quadrature;
pub mod report;
pub mod rng;

pub use dgp::{EstimatorPair, ExperimentConfig, PanelSample};
pub use error::{Error, Result};
pub use rng::NoiseStreams;
