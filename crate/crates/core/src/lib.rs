//! Online and retrospective monitoring of strict stationarity for a
//! univariate time series.
//!
//! The building blocks, bottom-up:
//!
//! * [`kernel`]: delay embedding and closed-form pair kernels of the weight
//!   function (Gaussian or energy).
//! * [`statistic`]: the L2 distance between empirical characteristic
//!   functions, in batch form, by direct quadrature, and as an incremental
//!   accumulator.
//! * [`detector`]: boundary function, detector, closed-end stopping rule and
//!   the retrospective single-split scan.
//! * [`bootstrap`]: stationary-bootstrap calibration of critical values,
//!   automatic block-length selection and p-values.
//! * [`asymptotic`]: critical values from the Brownian quadratic-form limit
//!   with an estimated long-run covariance.
//! * [`simulation`]: the null and alternative data-generating processes and a
//!   warp-speed Monte Carlo harness.

pub mod asymptotic;
pub mod bootstrap;
pub mod detector;
pub mod error;
pub mod kernel;
pub mod seed;
pub mod simulation;
pub mod statistic;
pub mod sum;

pub use error::{Error, Result};
pub use kernel::{EmbeddingDim, KernelFamily, KernelSpec, Series};
pub use statistic::{d_batch, EcfAccumulator, StatVariant};
