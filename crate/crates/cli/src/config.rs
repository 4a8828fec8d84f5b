use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ivpanel_core::design::{ColumnType, Schema};
use serde::Deserialize;

use crate::error::CliError;

/// Parsed run configuration. Every section is optional at parse time; each
/// subcommand checks for the ones it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<InputSection>,
    #[serde(default)]
    pub schema: BTreeMap<String, SchemaEntry>,
    pub model: Option<ModelSection>,
    pub estimator: Option<EstimatorSection>,
    pub subsample: Option<SubsampleSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub simulate: Option<SimulateSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
}

/// `"real"`, `"integer"`, `"boolean"`, or a list of categorical levels.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SchemaEntry {
    Type(String),
    Levels(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub outcome: String,
    pub treatment: Option<String>,
    /// Instrument sets (`samesex`, `boys_girls`, `multibirth`,
    /// `samesex_multibirth`) or raw binary instrument columns; one model each.
    #[serde(default)]
    pub instruments: Vec<String>,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    #[serde(default = "yes")]
    pub intercept: bool,
    pub person_id: Option<String>,
    pub time: Option<String>,
    pub parity: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Wald,
    Tsls,
    Did,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    /// Bootstrap replicates; 0 skips the bootstrap.
    #[serde(default)]
    pub replicates: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "yes")]
    pub ar: bool,
    pub ar_half_width: Option<f64>,
    pub ar_step_divisor: Option<f64>,
    pub max_fe_groups: Option<usize>,
    #[serde(default = "default_lags")]
    pub lags: usize,
    #[serde(default = "default_leads")]
    pub leads: usize,
    #[serde(default)]
    pub transition: i64,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default)]
    pub outcome_lags: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleSection {
    pub by: String,
    pub levels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Census,
    Panel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub kind: SimKind,
    /// Mothers (census) or persons (panel).
    pub n: usize,
    pub seed: Option<u64>,
    pub noise_sd: Option<f64>,
    // census
    pub p_boy: Option<f64>,
    pub p_multibirth: Option<f64>,
    pub p_third_child: Option<f64>,
    pub confounder_strength: Option<f64>,
    pub instrument_strength: Option<f64>,
    pub reverse_causality: Option<f64>,
    pub tau: Option<TauEntry>,
    // panel
    pub periods: Option<usize>,
    pub lags: Option<usize>,
    pub att_profile: Option<Vec<f64>>,
    pub omitted_selection: Option<f64>,
    /// Extra yearly outcome growth of graduates.
    pub trend_graduated: Option<f64>,
}

/// A constant effect, or a table keyed by a column or an instrument.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TauEntry {
    Constant(f64),
    ByGroup { column: String, effects: BTreeMap<String, f64>, default: f64 },
    ComplierSpecific { instrument: String, complier: f64, other: f64 },
}

fn yes() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

fn default_lags() -> usize {
    3
}

fn default_leads() -> usize {
    5
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn schema(&self) -> Result<Schema, CliError> {
        self.schema
            .iter()
            .map(|(name, entry)| {
                let ty = match entry {
                    SchemaEntry::Type(t) => match t.as_str() {
                        "real" => ColumnType::Real,
                        "integer" => ColumnType::Integer,
                        "boolean" => ColumnType::Boolean,
                        other => return Err(CliError::Config(format!("schema `{name}`: unknown type `{other}`"))),
                    },
                    SchemaEntry::Levels(levels) if levels.is_empty() => {
                        return Err(CliError::Config(format!("schema `{name}`: empty level list")))
                    }
                    SchemaEntry::Levels(levels) => ColumnType::Categorical(levels.clone()),
                };
                Ok((name.clone(), ty))
            })
            .collect()
    }

    pub fn model(&self) -> Result<&ModelSection, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("missing [model] section".into()))
    }

    pub fn estimator(&self) -> Result<&EstimatorSection, CliError> {
        self.estimator.as_ref().ok_or_else(|| CliError::Config("missing [estimator] section".into()))
    }

    pub fn input_path(&self, base: &Path) -> Result<PathBuf, CliError> {
        let input = self.input.as_ref().ok_or_else(|| CliError::Config("missing [input] section".into()))?;
        Ok(base.join(&input.path))
    }
}

impl EstimatorSection {
    pub fn check_level(&self) -> Result<(), CliError> {
        if self.level > 0.0 && self.level < 1.0 {
            Ok(())
        } else {
            Err(CliError::Config(format!("level {} must lie in (0, 1)", self.level)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_entries() {
        let cfg = RunConfig::parse(
            r#"
            [schema]
            age = "integer"
            region = ["north", "south"]
            "#,
        )
        .unwrap();
        let s = cfg.schema().unwrap();
        assert_eq!(s["age"], ColumnType::Integer);
        assert_eq!(s["region"], ColumnType::Categorical(vec!["north".into(), "south".into()]));
    }

    #[test]
    fn unknown_keys_and_types_are_rejected() {
        assert!(RunConfig::parse("[model]\noutcome = 'y'\ntypo = 1").is_err());
        let cfg = RunConfig::parse("[schema]\nx = 'float'").unwrap();
        assert!(matches!(cfg.schema(), Err(CliError::Config(_))));
    }

    #[test]
    fn tau_forms() {
        let cfg = RunConfig::parse(
            r#"
            [simulate]
            kind = "census"
            n = 10
            tau = { column = "education", effects = { tertiary = 0.0 }, default = -0.1 }
            "#,
        )
        .unwrap();
        assert!(matches!(cfg.simulate.unwrap().tau, Some(TauEntry::ByGroup { .. })));
    }
}
