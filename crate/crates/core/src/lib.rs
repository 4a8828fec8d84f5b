//! Instrumental-variable and treatment-history panel-matching estimators
//! for the effect of childbearing on labour-market outcomes, plus a
//! synthetic data generator that stores potential outcomes so every
//! estimator can be checked against ground truth.
//!
//! The numerical kernel in [`stats`] and the balancing solver in [`cbps`]
//! are generic over [`Scalar`] (`f32`/`f64`); the data-facing estimators
//! work in `f64`. Aliases for the `f64` instantiations live at the crate
//! root.

pub mod cbps;
pub mod design;
pub mod iv;
pub mod panel;
mod scalar;
pub mod sim;
pub mod stats;

pub use scalar::Scalar;

pub type Matrix = stats::Matrix<f64>;
pub type DesignMatrix = stats::DesignMatrix<f64>;
pub type FitResult = stats::FitResult<f64>;
pub type TwoSampleDiff = stats::TwoSampleDiff<f64>;
pub type CbpsFit = cbps::CbpsFit<f64>;
pub type BalanceReport = cbps::BalanceReport<f64>;

