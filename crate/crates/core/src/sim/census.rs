use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::census::{
    AGE_BANDS, CHILD1_AGE, CHILD2_AGE, EDUCATION, EDUCATION_LEVELS, EMPLOYED, MARRIED, MORE_THAN_2, MOTHER_AGE_GROUP,
    MULTIBIRTH, REGION, REGIONS, RURAL, SECOND_JOB, SEX_CHILD1, SEX_CHILD2,
};
use crate::design::{Column, Dataset};
use crate::sim::{bisect, check_probability, Compliance, Hidden, SimError, SimOutput};

/// Instruments with stored compliance types.
pub const CENSUS_INSTRUMENTS: [&str; 3] = ["samesex", "boys_girls", "multibirth"];

const AGE_BAND_P: [f64; 6] = [0.10, 0.25, 0.27, 0.20, 0.12, 0.06];
const EDUCATION_P: [f64; 3] = [0.35, 0.40, 0.25];

/// Individual effect `Y(1) - Y(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSpec {
    Constant(f64),
    /// Effect by level of a categorical covariate (`education` or
    /// `mother_age_group`); unlisted levels get `default`.
    ByGroup { column: String, effects: BTreeMap<String, f64>, default: f64 },
    /// `complier` for compliers of `instrument`, `other` for everyone else.
    ComplierSpecific { instrument: String, complier: f64, other: f64 },
}

/// Census generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DGPConfig {
    pub n: usize,
    pub seed: u64,
    pub p_boy: f64,
    pub p_multibirth: f64,
    /// `P(third child)` among single second births with mixed-sex children.
    pub p_third_child: f64,
    /// Loading of the unobserved `U` on the treatment index (+) and on the
    /// outcome (-).
    pub confounder_strength: f64,
    /// Target same-sex complier share (the first stage).
    pub instrument_strength: f64,
    pub tau: TauSpec,
    /// Loading of the mean untreated outcome on the treatment index.
    pub reverse_causality: f64,
    pub noise_sd: f64,
    /// Mean untreated outcome of the reference group.
    pub baseline: f64,
    pub theta: CovariateEffects,
}

/// Covariate effects on the untreated outcome (`outcome`) and on the
/// treatment index (`index`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateEffects {
    pub married: (f64, f64),
    pub rural: (f64, f64),
    pub education: [(f64, f64); 3],
    pub age_band: [(f64, f64); 6],
    /// Per year of the younger child's age.
    pub child2_age: (f64, f64),
}

impl Default for CovariateEffects {
    fn default() -> Self {
        Self {
            married: (0.05, 0.4),
            rural: (-0.04, 0.3),
            education: [(0.0, 0.0), (0.06, -0.15), (0.12, -0.3)],
            age_band: [(-0.1, 0.2), (-0.03, 0.1), (0.0, 0.0), (0.02, -0.1), (0.0, -0.2), (-0.05, -0.3)],
            child2_age: (0.01, -0.03),
        }
    }
}

impl Default for DGPConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            seed: 0,
            p_boy: 0.51,
            p_multibirth: 0.01,
            p_third_child: 0.14,
            confounder_strength: 0.3,
            instrument_strength: 0.03,
            tau: TauSpec::Constant(-0.05),
            reverse_causality: 0.0,
            noise_sd: 0.45,
            baseline: 0.6,
            theta: CovariateEffects::default(),
        }
    }
}

impl DGPConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::InvalidConfig("n must be at least 1".into()));
        }
        check_probability("p_boy", self.p_boy)?;
        check_probability("p_multibirth", self.p_multibirth)?;
        check_probability("p_third_child", self.p_third_child)?;
        check_probability("instrument_strength", self.instrument_strength)?;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(SimError::InvalidConfig("noise_sd must be finite and non-negative".into()));
        }
        match &self.tau {
            TauSpec::ByGroup { column, .. } if column != EDUCATION && column != MOTHER_AGE_GROUP => {
                Err(SimError::InvalidConfig(format!("cannot key effects on `{column}`")))
            }
            TauSpec::ComplierSpecific { instrument, .. } if !CENSUS_INSTRUMENTS.contains(&instrument.as_str()) => {
                Err(SimError::UnknownInstrument(instrument.clone()))
            }
            _ => Ok(()),
        }
    }
}

fn categorical_draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

struct Unit {
    boy1: bool,
    boy2: bool,
    twins: bool,
    age_band: usize,
    child1_age: f64,
    child2_age: f64,
    married: bool,
    rural: bool,
    region: usize,
    education: usize,
    u: f64,
    v: f64,
    eps: f64,
    eps2: f64,
}

/// Draws a census of mothers of at least two children.
///
/// The third-child index is `a + x'k + s U + r m(x, U) + g z_samesex - v`
/// with `v ~ N(0, 1)` and `m` the mean untreated outcome; twins at the
/// second birth always have a third child. The intercept `a` and the
/// same-sex shift `g` are set by bisection on the drawn sample so that the
/// mixed-sex single-birth treatment rate is `p_third_child` and the
/// realised same-sex complier share is `instrument_strength`.
/// `Y(0) = baseline + theta'x - s U + e`, `Y(1) = Y(0) + tau_i`.
pub fn simulate_census(cfg: &DGPConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units: Vec<Unit> = (0..cfg.n)
        .map(|_| {
            let boy1 = rng.random_bool(cfg.p_boy);
            let boy2 = rng.random_bool(cfg.p_boy);
            let twins = rng.random_bool(cfg.p_multibirth);
            let age_band = categorical_draw(&mut rng, &AGE_BAND_P);
            let child1_age = rng.random_range(3..=17) as f64;
            let gap = rng.random_range(1..=5) as f64;
            let married = rng.random_bool(0.75);
            let rural = rng.random_bool(0.3);
            let region = rng.random_range(0..REGIONS.len());
            let education = categorical_draw(&mut rng, &EDUCATION_P);
            Unit {
                boy1,
                boy2,
                twins,
                age_band,
                child1_age,
                child2_age: (child1_age - gap).max(0.0),
                married,
                rural,
                region,
                education,
                u: rng.sample(StandardNormal),
                v: rng.sample(StandardNormal),
                eps: rng.sample(StandardNormal),
                eps2: rng.sample(StandardNormal),
            }
        })
        .collect();

    let th = &cfg.theta;
    let s = cfg.confounder_strength;
    let effect = |pick: fn((f64, f64)) -> f64, u: &Unit| {
        pick(th.married) * u.married as u8 as f64
            + pick(th.rural) * u.rural as u8 as f64
            + pick(th.education[u.education])
            + pick(th.age_band[u.age_band])
            + pick(th.child2_age) * u.child2_age
    };
    let mean_y0: Vec<f64> = units.iter().map(|u| cfg.baseline + effect(|p| p.0, u) - s * u.u).collect();
    // index without intercept and instrument shift
    let index: Vec<f64> = units
        .iter()
        .zip(&mean_y0)
        .map(|(u, m)| effect(|p| p.1, u) + s * u.u + cfg.reverse_causality * m - u.v)
        .collect();
    let samesex: Vec<bool> = units.iter().map(|u| u.boy1 == u.boy2).collect();

    let base_rows: Vec<usize> = (0..cfg.n).filter(|&i| !units[i].twins && !samesex[i]).collect();
    let rate = |a: f64| {
        if base_rows.is_empty() {
            return 0.0;
        }
        base_rows.iter().filter(|&&i| index[i] + a > 0.0).count() as f64 / base_rows.len() as f64
    };
    let alpha = bisect(-30.0, 30.0, cfg.p_third_child, 80, rate);

    // compliers: untreated without the shift, treated with it
    let share = |g: f64| {
        (0..cfg.n).filter(|&i| !units[i].twins && index[i] + alpha <= 0.0 && index[i] + alpha + g > 0.0).count()
            as f64
            / cfg.n as f64
    };
    let gamma = bisect(0.0, 30.0, cfg.instrument_strength, 50, share);
    let achieved = share(gamma);
    if (achieved - cfg.instrument_strength).abs() > 0.005 {
        return Err(SimError::CalibrationFailed {
            what: "same-sex complier share",
            target: cfg.instrument_strength,
            achieved,
        });
    }

    let n = cfg.n;
    let mut d = Vec::with_capacity(n);
    let mut ss_type = Vec::with_capacity(n);
    let mut mb_type = Vec::with_capacity(n);
    for i in 0..n {
        let d_z0 = index[i] + alpha > 0.0;
        let d_z1 = index[i] + alpha + gamma > 0.0;
        let single = if samesex[i] { d_z1 } else { d_z0 };
        d.push(units[i].twins || single);
        ss_type.push(match (units[i].twins, d_z0, d_z1) {
            (true, _, _) | (false, true, _) => Compliance::AlwaysTaker,
            (false, false, true) => Compliance::Complier,
            (false, false, false) => Compliance::NeverTaker,
        });
        mb_type.push(if single { Compliance::AlwaysTaker } else { Compliance::Complier });
    }
    let mut compliance = BTreeMap::new();
    compliance.insert("samesex".to_string(), ss_type.clone());
    compliance.insert("boys_girls".to_string(), ss_type);
    compliance.insert("multibirth".to_string(), mb_type);

    let tau: Vec<f64> = (0..n)
        .map(|i| match &cfg.tau {
            TauSpec::Constant(t) => *t,
            TauSpec::ByGroup { column, effects, default } => {
                let level = if column == EDUCATION {
                    EDUCATION_LEVELS[units[i].education]
                } else {
                    AGE_BANDS[units[i].age_band]
                };
                effects.get(level).copied().unwrap_or(*default)
            }
            TauSpec::ComplierSpecific { instrument, complier, other } => {
                if compliance[instrument.as_str()][i] == Compliance::Complier {
                    *complier
                } else {
                    *other
                }
            }
        })
        .collect();
    let y0: Vec<f64> = (0..n).map(|i| mean_y0[i] + cfg.noise_sd * units[i].eps).collect();
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + tau[i]).collect();
    let y: Vec<f64> = (0..n).map(|i| if d[i] { y1[i] } else { y0[i] }).collect();
    let second_job: Vec<f64> = units.iter().map(|u| 0.08 + 0.02 * u.u + 0.1 * u.eps2).collect();

    let categorical = |names: &[&'static str], idx: fn(&Unit) -> usize| {
        let labels: Vec<Option<&str>> = units.iter().map(|u| Some(names[idx(u)])).collect();
        Column::categorical(names.iter().map(|s| s.to_string()).collect(), &labels)
    };
    let data = Dataset::new()
        .with_column(EMPLOYED, Column::from_reals(y))?
        .with_column(SECOND_JOB, Column::from_reals(second_job))?
        .with_column(MORE_THAN_2, Column::from_bools(d))?
        .with_column(SEX_CHILD1, Column::from_bools(units.iter().map(|u| u.boy1).collect()))?
        .with_column(SEX_CHILD2, Column::from_bools(units.iter().map(|u| u.boy2).collect()))?
        .with_column(MULTIBIRTH, Column::from_bools(units.iter().map(|u| u.twins).collect()))?
        .with_column(MOTHER_AGE_GROUP, categorical(&AGE_BANDS, |u| u.age_band)?)?
        .with_column(CHILD1_AGE, Column::from_reals(units.iter().map(|u| u.child1_age).collect()))?
        .with_column(CHILD2_AGE, Column::from_reals(units.iter().map(|u| u.child2_age).collect()))?
        .with_column(MARRIED, Column::from_bools(units.iter().map(|u| u.married).collect()))?
        .with_column(RURAL, Column::from_bools(units.iter().map(|u| u.rural).collect()))?
        .with_column(REGION, categorical(&REGIONS, |u| u.region)?)?
        .with_column(EDUCATION, categorical(&EDUCATION_LEVELS, |u| u.education)?)?;

    Ok(SimOutput {
        data,
        hidden: Hidden {
            u: units.iter().map(|u| u.u).collect(),
            y0,
            y1,
            compliance,
            event_time: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_given_seed() {
        let cfg = DGPConfig { n: 3000, seed: 5, ..DGPConfig::default() };
        assert_eq!(simulate_census(&cfg).unwrap(), simulate_census(&cfg).unwrap());
    }

    #[test]
    fn calibration_hits_targets() {
        let cfg = DGPConfig { n: 50_000, seed: 1, ..DGPConfig::default() };
        let sim = simulate_census(&cfg).unwrap();
        let ss = &sim.hidden.compliance["samesex"];
        let share = ss.iter().filter(|c| **c == Compliance::Complier).count() as f64 / cfg.n as f64;
        assert!((share - 0.03).abs() <= 0.005);
        let mb = &sim.hidden.compliance["multibirth"];
        let pc = mb.iter().filter(|c| **c == Compliance::Complier).count() as f64 / cfg.n as f64;
        assert!((0.80..=0.88).contains(&pc), "{pc}");
    }

    #[test]
    fn observed_outcome_is_the_realised_potential_outcome() {
        let sim = simulate_census(&DGPConfig { n: 500, seed: 2, ..DGPConfig::default() }).unwrap();
        let y = sim.data.numeric_complete(EMPLOYED).unwrap();
        let d = sim.data.binary_complete(MORE_THAN_2).unwrap();
        for i in 0..500 {
            assert_eq!(y[i], if d[i] { sim.hidden.y1[i] } else { sim.hidden.y0[i] });
        }
    }

    #[test]
    fn forcing_treatment_changes_outcome_only_through_it() {
        // do(D = 1) for everyone: Y moves by exactly tau_i
        let sim = simulate_census(&DGPConfig { n: 400, seed: 3, ..DGPConfig::default() }).unwrap();
        for (a, b) in sim.hidden.y0.iter().zip(&sim.hidden.y1) {
            assert!((b - a - (-0.05)).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_strength_fails_calibration() {
        let cfg = DGPConfig { n: 2000, instrument_strength: 0.99, ..DGPConfig::default() };
        assert!(matches!(simulate_census(&cfg), Err(SimError::CalibrationFailed { .. })));
        assert!(matches!(simulate_census(&DGPConfig { n: 0, ..DGPConfig::default() }), Err(SimError::InvalidConfig(_))));
    }
}
