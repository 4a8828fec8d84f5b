//! Treatment-history panel matching with an age time axis: matched-set
//! construction per parity transition, CBPS refinement, dynamic ATT with
//! placebo pre-periods and a person-block bootstrap.

mod att;
mod data;
mod matching;
mod outcomes;

use thiserror::Error;

use crate::cbps::CbpsError;
use crate::design::DesignError;
use crate::stats::StatsError;

pub use att::{att, att_with_ci, estimate, AttEntry, AttKind, DidSpec, DynamicATT};
pub use data::PanelDataset;
pub use matching::{
    find_matched_sets, refine, CovariateSpec, MatchedSet, MatchedSets, RefineMethod, Stratum, StratumDiagnostics,
};
pub use outcomes::{cap_hours, log_income, MAX_WEEKLY_HOURS};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PanelError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Cbps(#[from] CbpsError),
    #[error("parity decreases over time for person `{0}`")]
    NonAbsorbing(String),
    #[error("covariate lag {0} is not strictly before treatment")]
    PostTreatmentLag(i64),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("no matched sets")]
    NoMatchedSets,
    #[error("no matched set has data at offset {0}")]
    LeadUnavailable(i64),
}
