//! Data model and the transformations that turn raw tables into design
//! matrices: instrument construction, categorical encoding, fixed-effect
//! absorption, listwise deletion and subsampling.

pub mod census;
mod csv_io;
mod dataset;
mod encode;
mod instruments;
mod spec;
mod subsample;

use thiserror::Error;

use crate::stats::StatsError;

pub use csv_io::{format_real, read_csv, write_csv, Schema};
pub use dataset::{Column, ColumnType, Dataset};
pub use encode::{encode, EncodeOptions, EncodedModel, INTERCEPT};
pub use instruments::build_instruments;
pub use spec::{InstrumentSet, ModelSpec};
pub use subsample::{bin_column, listwise_delete, subsample};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DesignError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` is not binary")]
    NonBinary(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("column `{0}` must be integer")]
    NotInteger(String),
    #[error("column `{0}` is not categorical or binned")]
    NotCategorical(String),
    #[error("column `{column}` has {count} missing values; apply listwise deletion first")]
    MissingValues { column: String, count: usize },
    #[error("column `{column}` has length {found}, expected {expected}")]
    LengthMismatch { column: String, expected: usize, found: usize },
    #[error("duplicate (person, time) pair ({person}, {time})")]
    DuplicateKey { person: String, time: String },
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("fixed effect `{column}` has {groups} groups (limit {max})")]
    LevelExplosion { column: String, groups: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("cannot parse `{value}` in column `{column}`")]
    Parse { column: String, value: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
