//! Wald ratio, two-stage least squares with weak-instrument and
//! specification diagnostics, Anderson-Rubin confidence sets and
//! subgroup LATEs.

mod anderson_rubin;
mod groups;
mod tsls;
mod wald;

use thiserror::Error;

use crate::design::DesignError;
use crate::stats::StatsError;

pub use anderson_rubin::{anderson_rubin_stat, ar_confidence_set, ArConfidenceSet, ArGrid};
pub use groups::{late_by_group, GroupFit, MIN_GROUP_SIZE};
pub use tsls::{
    ols_encoded, ols_model, prepare, tsls_encoded, tsls_fit, tsls_fit_with, OlsResult, Sargan, TestStat, TslsOptions,
    TwoSlsResult,
};
pub use wald::{complier_shares, wald_estimate, WaldResult, MIN_FIRST_STAGE};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IvError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("instrument takes a single value")]
    DegenerateInstrument,
    #[error("first stage is zero; the ratio is undefined")]
    ZeroFirstStage,
    #[error("inputs have different lengths")]
    LengthMismatch,
    #[error("model has no excluded instruments")]
    NoInstruments,
    #[error("no complete observations")]
    EmptySample,
    #[error("{n} observations cannot identify {params} parameters")]
    TooFewObservations { n: usize, params: usize },
    #[error("subsample `{0}` is too small to fit")]
    SubsampleTooSmall(String),
    #[error("standard error of the estimate is not positive and finite")]
    DegenerateStandardError,
}
