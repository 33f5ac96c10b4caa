//! Dynamic covariance forecasting for multivariate return series.
//!
//! The crate provides:
//! - [`mvstat`]: SPD linear algebra and multivariate density/sampling kernels;
//! - [`models`]: GARCH/BEKK covariance recursions, the dynamic-parameter
//!   variant with a random-walk diffusion, and generative simulation;
//! - [`mle`]: constrained maximum-likelihood fitting of BEKK and BEKK-T;
//! - [`rapf`]: a regularized auxiliary particle filter for online joint
//!   inference of dynamic parameters, drift hyperparameters and tail index;
//! - [`eval`]: the rolling one-step-ahead evaluation protocol and the
//!   Friedman/Nemenyi multi-method comparison;
//! - [`data`]: CSV ingestion, price-to-return conversion and standardization.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod mle;
pub mod models;
pub mod mvstat;
pub mod rapf;
pub mod series;

pub use error::{Error, Result};
pub use mvstat::CovMatrix;
pub use series::ReturnSeries;
