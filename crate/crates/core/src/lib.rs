//! Bandwidth selection for locally stationary time series: localized moment
//! estimators, global cross-validation and local Lepski-type selection.

pub mod cv;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod kernels;
pub mod lepski;
pub mod moments;
pub mod processes;

pub use error::{Error, Result};
pub use kernels::{Kernel, KernelConstants, TruncatedKernel};
pub use moments::{Composition, Estimator, MomentFunctional, MomentSeries, Variant};
pub use processes::{simulate_stationary, simulate_tvar, CoefficientCurve, StreamSeed, TimeSeriesPath};
