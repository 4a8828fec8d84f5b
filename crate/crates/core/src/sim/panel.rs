use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{Column, Dataset};
use crate::sim::{check_probability, Hidden, SimError, SimOutput};

/// Observed pre-treatment covariates of the panel.
pub const PANEL_COVARIATES: [&str; 3] = ["graduated", "partnered", "urban"];

/// Age-panel generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub n_persons: usize,
    pub seed: u64,
    pub first_age: i64,
    /// Observed ages per person.
    pub periods: usize,
    /// Pre-treatment window the analysis will use; only checked against
    /// `periods`.
    pub lags: usize,
    /// Effect of the first birth at event times `0, 1, ...`; the last value
    /// persists.
    pub att_profile: Vec<f64>,
    pub p_graduated: f64,
    pub p_urban: f64,
    /// Logit of the yearly birth probability for a childless,
    /// non-graduated, unpartnered woman.
    pub hazard_base: f64,
    pub hazard_graduated: f64,
    pub hazard_partnered: f64,
    /// Per child already born.
    pub hazard_parity: f64,
    /// Loading of the unobserved `u` on the birth hazard.
    pub hazard_u: f64,
    /// Yearly outcome growth.
    pub trend: f64,
    pub trend_graduated: f64,
    /// Loading of `u` on the yearly growth.
    pub trend_u: f64,
    pub noise_sd: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            n_persons: 5000,
            seed: 0,
            first_age: 18,
            periods: 18,
            lags: 3,
            att_profile: vec![-0.8, -0.8, -0.6, -0.2, 0.0, 0.0],
            p_graduated: 0.4,
            p_urban: 0.6,
            hazard_base: -3.0,
            hazard_graduated: -0.7,
            hazard_partnered: 1.6,
            hazard_parity: -1.0,
            hazard_u: 0.0,
            trend: 0.01,
            trend_graduated: 0.03,
            trend_u: 0.0,
            noise_sd: 0.1,
        }
    }
}

impl PanelConfig {
    /// Adds selection on the unobserved `u`: it raises the birth hazard and
    /// lowers outcome growth, so parallel trends fail given the observed
    /// covariates.
    pub fn with_omitted_selection(mut self, strength: f64) -> Self {
        self.hazard_u = strength;
        self.trend_u = -0.1 * strength;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_persons == 0 {
            return Err(SimError::InvalidConfig("n_persons must be at least 1".into()));
        }
        if self.att_profile.is_empty() {
            return Err(SimError::InvalidConfig("att_profile is empty".into()));
        }
        let need = self.lags + self.att_profile.len() + 1;
        if self.periods < need {
            return Err(SimError::InvalidConfig(format!(
                "{} periods cannot hold {} lags and {} leads (need {need})",
                self.periods,
                self.lags,
                self.att_profile.len()
            )));
        }
        check_probability("p_graduated", self.p_graduated)?;
        check_probability("p_urban", self.p_urban)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Women followed over `periods` consecutive ages with staggered births.
///
/// `Y(0) = a_i + g_i (age - first_age) + e`, with level `a_i` and growth
/// `g_i` depending on graduation and `u`. Births follow a logit hazard in
/// graduation, last year's partnership, parity and `u`. Observed outcomes
/// add `att_profile` from the first birth on. With `hazard_u = 0` or
/// `trend_u = 0` parallel trends hold conditional on the observed
/// covariates.
pub fn simulate_panel(cfg: &PanelConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = cfg.n_persons * cfg.periods;
    let mut pid = Vec::with_capacity(rows);
    let mut age = Vec::with_capacity(rows);
    let mut parity_col = Vec::with_capacity(rows);
    let mut y_col = Vec::with_capacity(rows);
    let mut grad_col = Vec::with_capacity(rows);
    let mut part_col = Vec::with_capacity(rows);
    let mut urban_col = Vec::with_capacity(rows);
    let mut yob_col = Vec::with_capacity(rows);
    let mut hidden_u = Vec::with_capacity(rows);
    let mut y0s = Vec::with_capacity(rows);
    let mut y1s = Vec::with_capacity(rows);
    let mut events = Vec::with_capacity(rows);

    for i in 0..cfg.n_persons {
        let u: f64 = rng.sample(StandardNormal);
        let graduated = rng.random_bool(cfg.p_graduated);
        let urban = rng.random_bool(cfg.p_urban);
        let yob: i64 = rng.random_range(1975..=1990);
        let g = graduated as u8 as f64;
        let level = 0.5 + 0.1 * g + 0.05 * urban as u8 as f64 + 0.05 * u;
        let growth = cfg.trend + cfg.trend_graduated * g + cfg.trend_u * u;
        let mut partnered = rng.random_bool(0.1);
        let mut parity = 0i64;
        let mut first_birth: Option<i64> = None;
        for k in 0..cfg.periods {
            let a = cfg.first_age + k as i64;
            if k > 0 {
                // hazard uses last year's partnership, then partnership evolves
                let h = cfg.hazard_base
                    + cfg.hazard_graduated * g
                    + cfg.hazard_partnered * partnered as u8 as f64
                    + cfg.hazard_parity * parity as f64
                    + cfg.hazard_u * u;
                let birth = parity < 3 && rng.random_bool(sigmoid(h));
                if birth {
                    parity += 1;
                    first_birth.get_or_insert(a);
                }
                partnered = if partnered { !rng.random_bool(0.04) } else { rng.random_bool(0.12) };
            }
            let noise: f64 = rng.sample(StandardNormal);
            let y0 = level + growth * k as f64 + cfg.noise_sd * noise;
            let event = first_birth.map(|b| a - b);
            let effect = event.map_or(0.0, |e| {
                let idx = (e as usize).min(cfg.att_profile.len() - 1);
                cfg.att_profile[idx]
            });
            pid.push(i as i64);
            age.push(a);
            parity_col.push(parity);
            y_col.push(y0 + effect);
            grad_col.push(graduated);
            part_col.push(partnered);
            urban_col.push(urban);
            yob_col.push(yob);
            hidden_u.push(u);
            y0s.push(y0);
            y1s.push(y0 + effect);
            events.push(event);
        }
    }

    let data = Dataset::new()
        .with_column("person_id", Column::from_ints(pid))?
        .with_column("age", Column::from_ints(age))?
        .with_column("parity", Column::from_ints(parity_col))?
        .with_column("employment", Column::from_reals(y_col))?
        .with_column("graduated", Column::from_bools(grad_col))?
        .with_column("partnered", Column::from_bools(part_col))?
        .with_column("urban", Column::from_bools(urban_col))?
        .with_column("year_of_birth", Column::from_ints(yob_col))?;
    Ok(SimOutput {
        data,
        hidden: Hidden { u: hidden_u, y0: y0s, y1: y1s, compliance: BTreeMap::new(), event_time: events },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn births_are_staggered_and_parity_absorbing() {
        let sim = simulate_panel(&PanelConfig { n_persons: 300, seed: 4, ..PanelConfig::default() }).unwrap();
        let par = sim.data.numeric_complete("parity").unwrap();
        let periods = PanelConfig::default().periods;
        let mut first_ages = std::collections::BTreeSet::new();
        for p in 0..300 {
            let s = &par[p * periods..(p + 1) * periods];
            assert!(s.windows(2).all(|w| w[1] >= w[0]));
            if let Some(k) = s.iter().position(|v| *v > 0.0) {
                first_ages.insert(k);
            }
        }
        assert!(first_ages.len() > 5);
    }

    #[test]
    fn too_short_panel_is_rejected() {
        let cfg = PanelConfig { periods: 9, ..PanelConfig::default() };
        assert!(matches!(simulate_panel(&cfg), Err(SimError::InvalidConfig(_))));
    }
}
