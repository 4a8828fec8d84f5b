use crate::design::{encode, listwise_delete, Dataset, EncodeOptions, EncodedModel, ModelSpec};
use crate::iv::anderson_rubin::{ar_confidence_set, ArConfidenceSet, ArGrid};
use crate::iv::IvError;
use crate::stats::dist::{chi2_sf, f_sf};
use crate::stats::{
    hc1_with_bread, ols_fit, standard_errors, wald_joint_test, ColumnRole, DesignMatrix, JointTest, Matrix, StatsError,
};

/// A test statistic with its reference degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStat {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Over-identification test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sargan {
    /// `n R^2` of the 2SLS residuals on `[Z, X]`, chi-squared with
    /// `instruments - 1` degrees of freedom.
    Statistic(TestStat),
    JustIdentified,
}

impl Sargan {
    pub fn stat(&self) -> Option<TestStat> {
        match self {
            Sargan::Statistic(s) => Some(*s),
            Sargan::JustIdentified => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoSlsResult {
    /// Coefficient on the fitted treatment.
    pub tau_hat: f64,
    /// Second-stage coefficients, treatment first, then `X`.
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub se_hc1: Vec<f64>,
    pub covariance: Matrix<f64>,
    /// Robust first-stage F on the excluded instruments.
    pub weak_f: JointTest,
    pub ar_ci: Option<ArConfidenceSet>,
    /// Control-function endogeneity test; `None` when the first-stage
    /// residual is identically zero (treatment instruments itself).
    pub wu_hausman: Option<TestStat>,
    pub sargan: Sargan,
    pub n_obs: usize,
    /// Rows dropped by listwise deletion before fitting.
    pub n_deleted: usize,
}

impl TwoSlsResult {
    pub fn se_tau(&self) -> f64 {
        self.se_hc1[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TslsOptions {
    pub encode: EncodeOptions,
    /// Anderson-Rubin grid; `None` skips the interval.
    pub ar: Option<ArGrid>,
    pub level: f64,
}

impl Default for TslsOptions {
    fn default() -> Self {
        Self { encode: EncodeOptions::default(), ar: Some(ArGrid::default()), level: 0.95 }
    }
}

impl TslsOptions {
    pub fn without_ar() -> Self {
        Self { ar: None, ..Self::default() }
    }
}

/// Listwise deletion over the model's columns followed by encoding.
pub fn prepare(ds: &Dataset, spec: &ModelSpec, opts: &EncodeOptions) -> Result<(EncodedModel, usize), IvError> {
    let (clean, removed) = listwise_delete(ds, &spec.columns())?;
    if clean.is_empty() {
        return Err(IvError::EmptySample);
    }
    Ok((encode(&clean, spec, opts)?, removed))
}

/// Two-stage least squares with the full diagnostic battery.
pub fn tsls_fit(ds: &Dataset, spec: &ModelSpec) -> Result<TwoSlsResult, IvError> {
    tsls_fit_with(ds, spec, &TslsOptions::default())
}

pub fn tsls_fit_with(ds: &Dataset, spec: &ModelSpec, opts: &TslsOptions) -> Result<TwoSlsResult, IvError> {
    spec.validate_iv()?;
    let (model, removed) = prepare(ds, spec, &opts.encode)?;
    let mut res = tsls_encoded(&model, opts)?;
    res.n_deleted = removed;
    Ok(res)
}

/// 2SLS on an already encoded model.
///
/// Stage 1 regresses `d` on `[Z, X]`; stage 2 regresses `y` on
/// `[d_hat, X]`. Second-stage residuals use the observed `d`, and the
/// HC1 sandwich is built on `[d_hat, X]` with those residuals.
pub fn tsls_encoded(model: &EncodedModel, opts: &TslsOptions) -> Result<TwoSlsResult, IvError> {
    let n = model.n_obs();
    let m = model.instruments.cols();
    if m == 0 {
        return Err(IvError::NoInstruments);
    }
    let w1 = &model.first_stage_x;
    let k2 = model.second_stage_x.parameter_count();
    if n <= w1.parameter_count().max(k2) {
        return Err(IvError::TooFewObservations { n, params: w1.parameter_count().max(k2) });
    }

    // stage 1
    let fit1 = ols_fit(w1, &model.d)?;
    let cov1 = hc1_with_bread(w1.values(), &fit1.gram_inverse, &fit1.residuals, w1.parameter_count());
    let z_idx: Vec<usize> = (0..m).collect();
    let weak_f = match wald_joint_test(&z_idx, &fit1.coefficients, &cov1, fit1.dof_residual) {
        // perfect first stage: the robust covariance vanishes
        Err(StatsError::SingularSubmatrix) => {
            JointTest { statistic: f64::INFINITY, df1: m, df2: fit1.dof_residual, p_value: 0.0 }
        }
        other => other?,
    };
    let d_hat = fit1.fitted(&model.d);

    // stage 2
    let w2_hat = DesignMatrix::single("d_hat", ColumnRole::Treatment, &d_hat)
        .map_err(|_| IvError::ZeroFirstStage)?
        .hstack(&model.exogenous)?
        .with_absorbed(model.absorbed);
    let fit2 = ols_fit(&w2_hat, &model.y)?;
    let beta = fit2.coefficients.clone();
    let fitted_actual = model.second_stage_x.values().matvec(&beta);
    let u: Vec<f64> = model.y.iter().zip(&fitted_actual).map(|(y, f)| y - f).collect();
    let covariance = hc1_with_bread(w2_hat.values(), &fit2.gram_inverse, &u, k2);
    let se_hc1 = standard_errors(&covariance);

    let wu_hausman = wu_hausman(model, &fit1.residuals)?;
    let sargan = if m > 1 { Sargan::Statistic(sargan(w1, &u, m)?) } else { Sargan::JustIdentified };

    let tau_hat = beta[0];
    let ar_ci = match &opts.ar {
        Some(grid) => Some(ar_confidence_set(model, tau_hat, se_hc1[0], opts.level, grid)?),
        None => None,
    };

    Ok(TwoSlsResult {
        tau_hat,
        coefficients: beta,
        names: model.second_stage_x.names().to_vec(),
        se_hc1,
        covariance,
        weak_f,
        ar_ci,
        wu_hausman,
        sargan,
        n_obs: n,
        n_deleted: 0,
    })
}

/// Adds the first-stage residual to an OLS of `y` on `[d, X]`; its squared
/// HC1 t statistic on `F(1, dof)`.
fn wu_hausman(model: &EncodedModel, v_hat: &[f64]) -> Result<Option<TestStat>, IvError> {
    let scale = model.d.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if v_hat.iter().all(|v| v.abs() <= 1e-10 * scale) {
        return Ok(None);
    }
    let aug = model
        .second_stage_x
        .hstack(&DesignMatrix::single("v_hat", ColumnRole::Exogenous, v_hat)?)?
        .with_absorbed(model.absorbed);
    let fit = match ols_fit(&aug, &model.y) {
        Ok(f) => f,
        Err(StatsError::RankDeficient(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let cov = hc1_with_bread(aug.values(), &fit.gram_inverse, &fit.residuals, aug.parameter_count());
    let j = aug.cols() - 1;
    let t = wald_joint_test(&[j], &fit.coefficients, &cov, fit.dof_residual)?;
    Ok(Some(TestStat { statistic: t.statistic, df: fit.dof_residual as f64, p_value: f_sf(t.statistic, 1.0, fit.dof_residual as f64) }))
}

/// `n R^2` from regressing the 2SLS residuals on `[Z, X]`.
fn sargan(w1: &DesignMatrix<f64>, u: &[f64], m: usize) -> Result<TestStat, IvError> {
    let fit = ols_fit(w1, u)?;
    let r2 = fit.r_squared_uncentered(u);
    let stat = u.len() as f64 * r2;
    let df = (m - 1) as f64;
    Ok(TestStat { statistic: stat, df, p_value: chi2_sf(stat, df) })
}

/// Least squares of `y` on `[d, X]` with HC1 standard errors.
#[derive(Debug, Clone)]
pub struct OlsResult {
    pub tau_hat: f64,
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub se_hc1: Vec<f64>,
    pub n_obs: usize,
}

pub fn ols_model(ds: &Dataset, spec: &ModelSpec, opts: &EncodeOptions) -> Result<OlsResult, IvError> {
    let mut spec = spec.clone();
    spec.instruments.clear();
    spec.validate()?;
    let (model, _) = prepare(ds, &spec, opts)?;
    ols_encoded(&model)
}

pub fn ols_encoded(model: &EncodedModel) -> Result<OlsResult, IvError> {
    let x = &model.second_stage_x;
    let fit = ols_fit(x, &model.y)?;
    let cov = hc1_with_bread(x.values(), &fit.gram_inverse, &fit.residuals, x.parameter_count());
    let se_hc1 = standard_errors(&cov);
    Ok(OlsResult {
        tau_hat: fit.coefficients[0],
        coefficients: fit.coefficients,
        names: x.names().to_vec(),
        se_hc1,
        n_obs: model.n_obs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Column;
    use crate::iv::wald_estimate;

    fn toy(n: usize, seed: u64) -> Dataset {
        // small LCG keeps the test free of the simulator
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut z = Vec::new();
        let mut z2 = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let zi = (next() < 0.5) as u8 as f64;
            let z2i = (next() < 0.3) as u8 as f64;
            let u = next() - 0.5;
            let xi = next();
            let di = (next() + 0.4 * zi + 0.2 * z2i + 0.5 * u > 0.9) as u8 as f64;
            y.push(0.3 * di + 0.5 * xi - 0.8 * u + 0.2 * (next() - 0.5));
            d.push(di);
            z.push(zi);
            z2.push(z2i);
            x.push(xi);
        }
        Dataset::new()
            .with_column("y", Column::from_reals(y))
            .unwrap()
            .with_column("d", Column::from_reals(d))
            .unwrap()
            .with_column("z", Column::from_reals(z))
            .unwrap()
            .with_column("z2", Column::from_reals(z2))
            .unwrap()
            .with_column("x", Column::from_reals(x))
            .unwrap()
    }

    #[test]
    fn no_covariate_single_instrument_equals_wald() {
        let ds = toy(400, 3);
        let spec = ModelSpec::new("y", "d").instruments(["z"]);
        let t = tsls_fit(&ds, &spec).unwrap();
        let y = ds.numeric_complete("y").unwrap();
        let d = ds.binary_complete("d").unwrap();
        let z = ds.binary_complete("z").unwrap();
        let w = wald_estimate(&y, &d, &z, 0, 0).unwrap();
        assert!((t.tau_hat - w.tau_hat).abs() <= 1e-10 * w.tau_hat.abs().max(1.0));
        assert!(t.weak_f.statistic > 0.0);
        assert_eq!(t.sargan, Sargan::JustIdentified);
    }

    #[test]
    fn self_instrumented_treatment_is_ols() {
        let ds = toy(300, 5);
        let spec = ModelSpec::new("y", "d").instruments(["d"]).exogenous(["x"]);
        let t = tsls_fit_with(&ds, &spec, &TslsOptions::without_ar()).unwrap();
        let o = ols_model(&ds, &spec, &EncodeOptions::default()).unwrap();
        assert!((t.tau_hat - o.tau_hat).abs() < 1e-10);
        assert!(t.wu_hausman.is_none());
    }

    #[test]
    fn over_identified_model_reports_sargan() {
        let ds = toy(800, 9);
        let spec = ModelSpec::new("y", "d").instruments(["z", "z2"]).exogenous(["x"]);
        let t = tsls_fit(&ds, &spec).unwrap();
        let s = t.sargan.stat().unwrap();
        assert_eq!(s.df, 1.0);
        assert!(s.statistic >= 0.0 && (0.0..=1.0).contains(&s.p_value));
        assert!(t.wu_hausman.is_some());
        assert!(matches!(t.ar_ci, Some(ArConfidenceSet::Interval { .. })));
    }

    #[test]
    fn empty_instrument_list_is_rejected() {
        let ds = toy(50, 1);
        assert!(tsls_fit(&ds, &ModelSpec::new("y", "d")).is_err());
    }
}
