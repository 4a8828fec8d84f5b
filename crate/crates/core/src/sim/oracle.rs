use std::fmt;

use crate::sim::{Compliance, SimError, SimOutput};

/// Population quantity read off the stored potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimand {
    Ate,
    /// Average effect among compliers of the named instrument.
    Late(String),
    /// Average effect among panel rows `lead` years after a first birth.
    Att(i64),
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimand::Ate => write!(f, "ate"),
            Estimand::Late(z) => write!(f, "late_{z}"),
            Estimand::Att(l) => write!(f, "att_{l}"),
        }
    }
}

/// Direct average of `Y(1) - Y(0)` over the estimand's population.
pub fn oracle(sim: &SimOutput, estimand: &Estimand) -> Result<f64, SimError> {
    let h = &sim.hidden;
    let effect = |i: usize| h.y1[i] - h.y0[i];
    let mean = |rows: &mut dyn Iterator<Item = usize>| {
        let (mut s, mut n) = (0.0, 0usize);
        for i in rows {
            s += effect(i);
            n += 1;
        }
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    };
    match estimand {
        Estimand::Ate => Ok(mean(&mut (0..h.y0.len()))),
        Estimand::Late(z) => {
            let types = h.compliance.get(z).ok_or_else(|| SimError::UnknownInstrument(z.clone()))?;
            Ok(mean(&mut (0..types.len()).filter(|&i| types[i] == Compliance::Complier)))
        }
        Estimand::Att(lead) => {
            if h.event_time.is_empty() {
                return Err(SimError::UnsupportedEstimand(estimand.to_string()));
            }
            Ok(mean(&mut (0..h.event_time.len()).filter(|&i| h.event_time[i] == Some(*lead))))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::sim::{simulate_census, simulate_panel, DGPConfig, PanelConfig, TauSpec};

    /// Independent pass: group effects by key, then combine group means.
    fn grouped_mean(effects: &[f64], keep: &[bool]) -> f64 {
        let mut by_sign: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for (e, k) in effects.iter().zip(keep) {
            if *k {
                let key = (e * 1e9).round() as i64;
                let entry = by_sign.entry(key).or_insert((0.0, 0));
                entry.0 += e;
                entry.1 += 1;
            }
        }
        let n: usize = by_sign.values().map(|v| v.1).sum();
        by_sign.values().map(|(s, c)| (s / *c as f64) * (*c as f64 / n as f64)).sum()
    }

    #[test]
    fn constant_effect_gives_equal_ate_and_late() {
        let sim = simulate_census(&DGPConfig { n: 2000, seed: 9, ..DGPConfig::default() }).unwrap();
        assert!((oracle(&sim, &Estimand::Ate).unwrap() + 0.05).abs() < 1e-12);
        assert!((oracle(&sim, &Estimand::Late("samesex".into())).unwrap() + 0.05).abs() < 1e-12);
        assert!(matches!(oracle(&sim, &Estimand::Late("nope".into())), Err(SimError::UnknownInstrument(_))));
    }

    #[test]
    fn complier_specific_effect_shrinks_ate() {
        let cfg = DGPConfig {
            n: 5000,
            seed: 10,
            tau: TauSpec::ComplierSpecific { instrument: "samesex".into(), complier: -0.05, other: 0.0 },
            ..DGPConfig::default()
        };
        let sim = simulate_census(&cfg).unwrap();
        let late = oracle(&sim, &Estimand::Late("samesex".into())).unwrap();
        let ate = oracle(&sim, &Estimand::Ate).unwrap();
        let share = sim.hidden.compliance["samesex"].iter().filter(|c| **c == Compliance::Complier).count() as f64
            / cfg.n as f64;
        assert!((late + 0.05).abs() < 1e-12);
        assert!((ate - (-0.05 * share)).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_config_matches_independent_pass() {
        let mut effects = BTreeMap::new();
        effects.insert("tertiary".to_string(), -0.12);
        effects.insert("secondary_professional".to_string(), -0.04);
        let cfg = DGPConfig {
            n: 4000,
            seed: 11,
            tau: TauSpec::ByGroup { column: "education".into(), effects, default: 0.02 },
            ..DGPConfig::default()
        };
        let sim = simulate_census(&cfg).unwrap();
        let e: Vec<f64> = sim.hidden.y1.iter().zip(&sim.hidden.y0).map(|(a, b)| a - b).collect();
        for z in ["samesex", "multibirth"] {
            let keep: Vec<bool> = sim.hidden.compliance[z].iter().map(|c| *c == Compliance::Complier).collect();
            let direct = oracle(&sim, &Estimand::Late(z.into())).unwrap();
            assert!((direct - grouped_mean(&e, &keep)).abs() < 1e-12);
        }
        let all = vec![true; e.len()];
        assert!((oracle(&sim, &Estimand::Ate).unwrap() - grouped_mean(&e, &all)).abs() < 1e-12);
    }

    #[test]
    fn panel_att_equals_imposed_profile() {
        let cfg = PanelConfig { n_persons: 400, seed: 12, ..PanelConfig::default() };
        let sim = simulate_panel(&cfg).unwrap();
        for (f, want) in cfg.att_profile.iter().enumerate() {
            assert!((oracle(&sim, &Estimand::Att(f as i64)).unwrap() - want).abs() < 1e-12);
        }
        let zero = simulate_panel(&PanelConfig { att_profile: vec![0.0; 6], ..cfg }).unwrap();
        assert_eq!(oracle(&zero, &Estimand::Att(2)).unwrap(), 0.0);
    }
}
