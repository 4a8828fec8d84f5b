//! Least squares, sandwich covariance, joint tests, two-sample balance
//! diagnostics and a seeded resampling engine.

pub mod bootstrap;
mod covariance;
mod design_matrix;
pub mod dist;
mod linalg;
mod ols;
mod two_sample;

use thiserror::Error;

pub use bootstrap::{blocks_by_id, bootstrap, BootstrapResult, BootstrapSpec, Resample, Resampling};
pub use covariance::{classical_covariance, hc1_covariance, hc1_with_bread, standard_errors};
pub use design_matrix::{ColumnRole, DesignMatrix};
pub use joint_test::{wald_joint_test, JointTest};
pub use linalg::{Matrix, PivotedQr};
pub use ols::{ols_fit, FitResult};
pub use two_sample::{two_sample_diff, TwoSampleDiff};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("design is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("{rows} observations cannot identify {params} parameters")]
    TooFewObservations { rows: usize, params: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("more than one intercept column")]
    MultipleIntercepts,
    #[error("column `{0}` is identically zero")]
    ZeroColumn(String),
    #[error("covariance sub-matrix of the tested coefficients is singular")]
    SingularSubmatrix,
    #[error("no coefficients selected for the joint test")]
    EmptySubset,
    #[error("coefficient index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("group {0} is empty")]
    EmptyGroup(u8),
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailures { failed: usize, total: usize },
}
