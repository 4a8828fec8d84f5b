use std::collections::HashSet;

use crate::design::census::{MULTIBIRTH, SEX_CHILD1, SEX_CHILD2, Z_BOYS, Z_GIRLS, Z_SAMESEX};
use crate::design::DesignError;

/// Declaration of one regression model over dataset columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub outcome: String,
    /// Binary endogenous treatment.
    pub treatment: String,
    pub instruments: Vec<String>,
    pub exogenous: Vec<String>,
    /// Categorical columns absorbed by within-group demeaning.
    pub fixed_effects: Vec<String>,
    pub intercept: bool,
}

impl ModelSpec {
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            treatment: treatment.into(),
            instruments: Vec::new(),
            exogenous: Vec::new(),
            fixed_effects: Vec::new(),
            intercept: true,
        }
    }

    pub fn instruments<S: Into<String>>(mut self, z: impl IntoIterator<Item = S>) -> Self {
        self.instruments = z.into_iter().map(Into::into).collect();
        self
    }

    pub fn exogenous<S: Into<String>>(mut self, x: impl IntoIterator<Item = S>) -> Self {
        self.exogenous = x.into_iter().map(Into::into).collect();
        self
    }

    pub fn fixed_effects<S: Into<String>>(mut self, fe: impl IntoIterator<Item = S>) -> Self {
        self.fixed_effects = fe.into_iter().map(Into::into).collect();
        self
    }

    pub fn intercept(mut self, yes: bool) -> Self {
        self.intercept = yes;
        self
    }

    /// Role checks shared by every estimator.
    pub fn validate(&self) -> Result<(), DesignError> {
        // the treatment may instrument itself (the projection is then the identity)
        if self.exogenous.contains(&self.treatment) {
            return Err(DesignError::InvalidSpec(format!("treatment `{}` also listed as exogenous", self.treatment)));
        }
        let z: HashSet<&String> = self.instruments.iter().collect();
        if let Some(both) = self.exogenous.iter().find(|x| z.contains(x)) {
            return Err(DesignError::InvalidSpec(format!("`{both}` is both instrument and exogenous")));
        }
        if self.exogenous.contains(&self.outcome) || z.contains(&self.outcome) || self.treatment == self.outcome {
            return Err(DesignError::InvalidSpec(format!("outcome `{}` used as a regressor", self.outcome)));
        }
        Ok(())
    }

    /// As [`validate`](Self::validate), plus at least one instrument.
    pub fn validate_iv(&self) -> Result<(), DesignError> {
        self.validate()?;
        if self.instruments.is_empty() {
            return Err(DesignError::InvalidSpec("IV model needs at least one instrument".into()));
        }
        Ok(())
    }

    /// Every column the model reads.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec![self.outcome.clone(), self.treatment.clone()];
        for c in self.instruments.iter().chain(&self.exogenous).chain(&self.fixed_effects) {
            if !cols.contains(c) {
                cols.push(c.clone());
            }
        }
        cols
    }
}

/// Instrument choices for the third-child design, with the child-sex
/// controls each one requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrumentSet {
    /// `z_samesex`, controlling for both child sexes.
    SameSex,
    /// `z_boys` and `z_girls`, controlling for the second child's sex only
    /// (the instruments are products of the two sexes).
    BoysGirls,
    /// Twins at the second birth, controlling for both child sexes.
    MultipleBirths,
    /// `z_samesex` and multiple births jointly (over-identified).
    SameSexAndMultipleBirths,
}

impl InstrumentSet {
    pub const ALL: [InstrumentSet; 4] =
        [Self::SameSex, Self::BoysGirls, Self::MultipleBirths, Self::SameSexAndMultipleBirths];

    pub fn name(self) -> &'static str {
        match self {
            Self::SameSex => "samesex",
            Self::BoysGirls => "boys_girls",
            Self::MultipleBirths => "multibirth",
            Self::SameSexAndMultipleBirths => "samesex_multibirth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == s)
    }

    pub fn instruments(self) -> Vec<&'static str> {
        match self {
            Self::SameSex => vec![Z_SAMESEX],
            Self::BoysGirls => vec![Z_BOYS, Z_GIRLS],
            Self::MultipleBirths => vec![MULTIBIRTH],
            Self::SameSexAndMultipleBirths => vec![Z_SAMESEX, MULTIBIRTH],
        }
    }

    pub fn sex_controls(self) -> Vec<&'static str> {
        match self {
            Self::BoysGirls => vec![SEX_CHILD2],
            _ => vec![SEX_CHILD1, SEX_CHILD2],
        }
    }

    /// `base` with this set's instruments and its sex controls prepended to
    /// the exogenous list.
    pub fn apply(self, base: &ModelSpec) -> ModelSpec {
        let mut spec = base.clone();
        spec.instruments = self.instruments().into_iter().map(String::from).collect();
        let mut exog: Vec<String> = self.sex_controls().into_iter().map(String::from).collect();
        for x in &base.exogenous {
            if !exog.contains(x) && x != SEX_CHILD1 && x != SEX_CHILD2 {
                exog.push(x.clone());
            }
        }
        spec.exogenous = exog;
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boys_girls_drops_first_child_sex() {
        let base = ModelSpec::new("employed", "more_than_2").exogenous(["married", SEX_CHILD1]);
        let s = InstrumentSet::BoysGirls.apply(&base);
        assert_eq!(s.instruments, vec![Z_BOYS, Z_GIRLS]);
        assert_eq!(s.exogenous, vec![SEX_CHILD2, "married"]);
        let s = InstrumentSet::SameSex.apply(&base);
        assert_eq!(s.exogenous, vec![SEX_CHILD1, SEX_CHILD2, "married"]);
    }

    #[test]
    fn overlapping_roles_are_invalid() {
        let s = ModelSpec::new("y", "d").instruments(["z"]).exogenous(["z"]);
        assert!(s.validate().is_err());
        assert!(ModelSpec::new("y", "d").validate_iv().is_err());
        assert!(ModelSpec::new("y", "d").exogenous(["d"]).validate().is_err());
    }
}
