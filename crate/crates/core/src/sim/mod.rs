//! Synthetic data with stored potential outcomes: a census of mothers
//! with sibling-sex and multiple-birth instruments, and an age panel with
//! staggered births and an imposed dynamic effect.

mod census;
mod oracle;
mod panel;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::design::{Dataset, DesignError};

pub use census::{simulate_census, DGPConfig, TauSpec, CENSUS_INSTRUMENTS};
pub use oracle::{oracle, Estimand};
pub use panel::{simulate_panel, PanelConfig, PANEL_COVARIATES};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not calibrate {what} to {target} (reached {achieved})")]
    CalibrationFailed { what: &'static str, target: f64, achieved: f64 },
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
    #[error("estimand {0} is not defined for this simulation")]
    UnsupportedEstimand(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Response type of a unit to one binary instrument. Defiers are never
/// generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compliance {
    AlwaysTaker,
    NeverTaker,
    Complier,
}

impl Compliance {
    pub fn name(self) -> &'static str {
        match self {
            Compliance::AlwaysTaker => "always_taker",
            Compliance::NeverTaker => "never_taker",
            Compliance::Complier => "complier",
        }
    }
}

/// Quantities an analyst never sees, aligned with the dataset rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    /// Unobserved confounder.
    pub u: Vec<f64>,
    pub y0: Vec<f64>,
    /// Equal to `y0` on panel rows before or without a birth.
    pub y1: Vec<f64>,
    /// Census only: compliance type per instrument name.
    pub compliance: BTreeMap<String, Vec<Compliance>>,
    /// Panel only: age minus age at first birth (`None` if childless).
    pub event_time: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Observables only.
    pub data: Dataset,
    pub hidden: Hidden,
}

fn check_probability(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidConfig(format!("{name} = {p} is not a probability")))
    }
}

/// Increasing-function root finder on `[lo, hi]` for `f(x) = target`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
