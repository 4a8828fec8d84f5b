//! Covariate balancing propensity score in its just-identified form.
//!
//! The logistic index `x'b` is chosen so that control units reweighted by
//! the odds `exp(x'b)` reproduce the treated covariate totals exactly:
//!
//! `g(b) = (1/n) [ sum_T x_i - sum_C exp(x_i'b) x_i ] = 0`.
//!
//! `g` is minus the gradient of the convex function
//! `f(b) = (1/n) [ sum_C exp(x_i'b) - sum_T x_i'b ]`, so the solver is a
//! Newton iteration with step halving on `f`.

use std::collections::HashMap;

use thiserror::Error;

use crate::stats::{ColumnRole, DesignMatrix, Matrix, PivotedQr};
use crate::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CbpsError {
    #[error("treatment and covariates have different lengths ({treatment} vs {covariates})")]
    LengthMismatch { treatment: usize, covariates: usize },
    #[error("no {0} units")]
    EmptyGroup(&'static str),
    #[error("covariates need an intercept column")]
    MissingIntercept,
    #[error("covariates are collinear: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("no convergence after {iterations} iterations (max moment {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("treated covariate means lie outside the control support")]
    PerfectSeparation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbpsOptions<T> {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the balance moment
    /// (computed on internally standardised covariates).
    pub tol: T,
}

impl<T: Scalar> Default for CbpsOptions<T> {
    fn default() -> Self {
        Self { max_iter: 200, tol: T::c(1e-6).max(T::epsilon() * T::c(100.0)) }
    }
}

/// Solved weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CbpsFit<T> {
    /// 1 for treated rows; odds for controls, scaled so the controls sum to
    /// the (frequency-weighted) treated count.
    pub weights: Vec<T>,
    /// Index coefficients on the standardised covariates.
    pub coefficients: Vec<T>,
    pub iterations: usize,
    /// Max-norm of the standardised balance moment at the solution.
    pub max_moment: T,
}

/// Just-identified CBPS weights for an ATT contrast.
pub fn cbps_weights<T: Scalar>(treatment: &[bool], covariates: &DesignMatrix<T>) -> Result<CbpsFit<T>, CbpsError> {
    cbps_weights_with(treatment, covariates, None, &CbpsOptions::default())
}

/// As [`cbps_weights`], with optional frequency weights (row multiplicities)
/// and solver options.
pub fn cbps_weights_with<T: Scalar>(
    treatment: &[bool],
    covariates: &DesignMatrix<T>,
    frequency: Option<&[T]>,
    opts: &CbpsOptions<T>,
) -> Result<CbpsFit<T>, CbpsError> {
    let n = covariates.rows();
    if treatment.len() != n || frequency.is_some_and(|f| f.len() != n) {
        return Err(CbpsError::LengthMismatch { treatment: treatment.len(), covariates: n });
    }
    if !covariates.has_intercept() {
        return Err(CbpsError::MissingIntercept);
    }
    let freq = |i: usize| frequency.map_or(T::one(), |f| f[i]);
    let n_t: T = (0..n).filter(|&i| treatment[i]).map(freq).sum();
    let n_c: T = (0..n).filter(|&i| !treatment[i]).map(freq).sum();
    if n_t <= T::zero() {
        return Err(CbpsError::EmptyGroup("treated"));
    }
    if n_c <= T::zero() {
        return Err(CbpsError::EmptyGroup("control"));
    }
    let qr = PivotedQr::new(covariates.values());
    if !qr.is_full_rank() {
        let names = qr.dependent_columns().into_iter().map(|j| covariates.names()[j].clone()).collect();
        return Err(CbpsError::RankDeficient(names));
    }

    let x = standardize(covariates, &freq);
    let problem = Collapsed::new(treatment, &x, &freq);
    let (beta, iterations, max_moment) = problem.solve(opts)?;

    // odds for every original row, normalised over controls
    let k = x.cols();
    let mut weights = vec![T::one(); n];
    let mut total = T::zero();
    for i in 0..n {
        if !treatment[i] {
            let eta: T = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
            weights[i] = eta.exp();
            total += freq(i) * weights[i];
        }
    }
    let scale = n_t / total;
    for i in 0..n {
        if !treatment[i] {
            weights[i] *= scale;
        }
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= T::zero()) {
        return Err(CbpsError::PerfectSeparation);
    }
    Ok(CbpsFit { weights, coefficients: beta, iterations, max_moment })
}

/// Centres and scales every non-intercept column; the column span (and
/// hence the weights) is unchanged.
fn standardize<T: Scalar>(x: &DesignMatrix<T>, freq: &impl Fn(usize) -> T) -> Matrix<T> {
    let n = x.rows();
    let total: T = (0..n).map(freq).sum();
    let mut out = x.values().clone();
    for (j, role) in x.roles().iter().enumerate() {
        if *role == ColumnRole::Intercept {
            continue;
        }
        let mean = (0..n).map(|i| freq(i) * out[(i, j)]).sum::<T>() / total;
        let var = (0..n).map(|i| freq(i) * (out[(i, j)] - mean).powi(2)).sum::<T>() / total;
        let sd = if var > T::zero() { var.sqrt() } else { T::one() };
        for i in 0..n {
            out[(i, j)] = (out[(i, j)] - mean) / sd;
        }
    }
    out
}

/// Distinct rows per arm with summed multiplicities.
struct Collapsed<T> {
    /// Treated covariate totals divided by `n`.
    target: Vec<T>,
    /// Distinct control rows and their multiplicities divided by `n`.
    rows: Vec<Vec<T>>,
    mass: Vec<T>,
    treated_rows: Vec<Vec<T>>,
    treated_mass: Vec<T>,
    k: usize,
}

impl<T: Scalar> Collapsed<T> {
    fn new(treatment: &[bool], x: &Matrix<T>, freq: &impl Fn(usize) -> T) -> Self {
        let (n, k) = (x.rows(), x.cols());
        let total: T = (0..n).map(freq).sum();
        let mut target = vec![T::zero(); k];
        let mut index: [HashMap<Vec<u64>, usize>; 2] = [HashMap::new(), HashMap::new()];
        let mut rows: [Vec<Vec<T>>; 2] = [Vec::new(), Vec::new()];
        let mut mass: [Vec<T>; 2] = [Vec::new(), Vec::new()];
        for i in 0..n {
            let r = x.row(i);
            let f = freq(i) / total;
            let arm = treatment[i] as usize;
            if treatment[i] {
                for (t, &v) in target.iter_mut().zip(r) {
                    *t += f * v;
                }
            }
            let key: Vec<u64> = r.iter().map(|v| v.to_f64_lossy().to_bits()).collect();
            match index[arm].get(&key) {
                Some(&p) => mass[arm][p] += f,
                None => {
                    index[arm].insert(key, rows[arm].len());
                    rows[arm].push(r.to_vec());
                    mass[arm].push(f);
                }
            }
        }
        let [rows, treated_rows] = rows;
        let [mass, treated_mass] = mass;
        Self { target, rows, mass, treated_rows, treated_mass, k }
    }

    fn eta(&self, row: &[T], beta: &[T]) -> T {
        row.iter().zip(beta).map(|(&a, &b)| a * b).sum()
    }

    fn objective(&self, beta: &[T]) -> T {
        let reweighted: T = self.rows.iter().zip(&self.mass).map(|(r, &m)| m * self.eta(r, beta).exp()).sum();
        reweighted - self.eta(&self.target, beta)
    }

    /// Balance moment `g(b)` (minus the gradient) and the Hessian.
    fn moment_and_hessian(&self, beta: &[T]) -> (Vec<T>, Matrix<T>) {
        let k = self.k;
        let mut g = self.target.clone();
        let mut h = vec![T::zero(); k * (k + 1) / 2];
        for (r, &m) in self.rows.iter().zip(&self.mass) {
            let w = m * self.eta(r, beta).exp();
            for (ga, &ra) in g.iter_mut().zip(r) {
                *ga -= w * ra;
            }
            add_outer(&mut h, r, w);
        }
        (g, unpack(&h, k))
    }

    fn max_abs(v: &[T]) -> T {
        v.iter().fold(T::zero(), |a, x| a.max(x.abs()))
    }

    /// Logistic-regression start; falls back to zero when the MLE
    /// misbehaves.
    fn logistic_start(&self) -> Vec<T> {
        let k = self.k;
        let mut beta = vec![T::zero(); k];
        for _ in 0..8 {
            let mut score = vec![T::zero(); k];
            let mut packed = vec![T::zero(); k * (k + 1) / 2];
            let arms = [(&self.treated_rows, &self.treated_mass, true), (&self.rows, &self.mass, false)];
            for (rows, mass, treated) in arms {
                for (r, &m) in rows.iter().zip(mass) {
                    let p = sigmoid(self.eta(r, &beta));
                    let resid = if treated { T::one() - p } else { -p };
                    for (s, &ra) in score.iter_mut().zip(r) {
                        *s += m * resid * ra;
                    }
                    add_outer(&mut packed, r, m * p * (T::one() - p));
                }
            }
            let info = unpack(&packed, k);
            let qr = PivotedQr::new(&info);
            if !qr.is_full_rank() {
                return vec![T::zero(); k];
            }
            let step = qr.solve_square(&score);
            for (b, s) in beta.iter_mut().zip(&step) {
                *b += *s;
            }
            if beta.iter().any(|b| !b.is_finite() || b.abs() > T::c(30.0)) {
                return vec![T::zero(); k];
            }
            if Self::max_abs(&step) < T::c(1e-8) {
                break;
            }
        }
        // the ATT index is the log-odds, so the MLE index is used as is
        beta
    }

    fn solve(&self, opts: &CbpsOptions<T>) -> Result<(Vec<T>, usize, T), CbpsError> {
        let mut beta = self.logistic_start();
        if !self.objective(&beta).is_finite() {
            beta = vec![T::zero(); self.k];
        }
        let strict = (opts.tol * T::c(1e-6)).max(T::epsilon() * T::c(16.0));
        let mut f = self.objective(&beta);
        for iter in 0..opts.max_iter {
            let (g, h) = self.moment_and_hessian(&beta);
            let gmax = Self::max_abs(&g);
            if gmax <= strict {
                return Ok((beta, iter, gmax));
            }
            let qr = PivotedQr::new(&h);
            if !qr.is_full_rank() {
                return Err(CbpsError::PerfectSeparation);
            }
            let step = qr.solve_square(&g);
            let mut t = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + t * s).collect();
                let ft = self.objective(&trial);
                if ft.is_finite() && ft < f {
                    beta = trial;
                    f = ft;
                    moved = true;
                    break;
                }
                if ft == f {
                    break;
                }
                t = t * T::c(0.5);
            }
            if !moved {
                // the objective is flat to working precision; a full Newton
                // step is kept while it still shrinks the moment
                let trial: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + s).collect();
                let g_trial = Self::max_abs(&self.moment_and_hessian(&trial).0);
                if g_trial.is_finite() && g_trial < gmax {
                    f = self.objective(&trial);
                    beta = trial;
                    continue;
                }
                return if gmax <= opts.tol {
                    Ok((beta, iter + 1, gmax))
                } else {
                    Err(CbpsError::NoConvergence { iterations: iter + 1, residual: gmax.to_f64_lossy() })
                };
            }
            if beta.iter().any(|b| !b.is_finite() || b.abs() > T::c(60.0)) {
                return Err(CbpsError::PerfectSeparation);
            }
        }
        let gmax = Self::max_abs(&self.moment_and_hessian(&beta).0);
        if gmax <= opts.tol {
            Ok((beta, opts.max_iter, gmax))
        } else if beta.iter().any(|b| b.abs() > T::c(20.0)) {
            Err(CbpsError::PerfectSeparation)
        } else {
            Err(CbpsError::NoConvergence { iterations: opts.max_iter, residual: gmax.to_f64_lossy() })
        }
    }
}

/// Adds `w r r'` to a row-packed upper triangle.
fn add_outer<T: Scalar>(packed: &mut [T], r: &[T], w: T) {
    let mut p = 0;
    for (a, &ra) in r.iter().enumerate() {
        let wa = w * ra;
        for &rb in &r[a..] {
            packed[p] += wa * rb;
            p += 1;
        }
    }
}

fn unpack<T: Scalar>(packed: &[T], k: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(k, k);
    let mut p = 0;
    for a in 0..k {
        for b in a..k {
            m[(a, b)] = packed[p];
            m[(b, a)] = packed[p];
            p += 1;
        }
    }
    m
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Balance of one covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBalance<T> {
    pub name: String,
    /// Unweighted difference in means over the pooled unweighted sd.
    pub std_diff_before: T,
    /// Weighted difference in means over the same sd.
    pub std_diff_after: T,
    /// The pooled sd is zero; both differences are left unstandardised.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport<T> {
    pub covariates: Vec<CovariateBalance<T>>,
    /// `(sum w)^2 / sum w^2` within each arm.
    pub ess_treated: T,
    pub ess_control: T,
    pub n_treated: usize,
    pub n_control: usize,
}

impl<T: Scalar> BalanceReport<T> {
    pub fn max_abs_std_diff_after(&self) -> T {
        self.covariates.iter().fold(T::zero(), |a, c| a.max(c.std_diff_after.abs()))
    }
}

/// Weighted versus unweighted covariate balance. Intercept columns are
/// skipped.
pub fn balance_report<T: Scalar>(
    treatment: &[bool],
    covariates: &DesignMatrix<T>,
    weights: &[T],
) -> Result<BalanceReport<T>, CbpsError> {
    let n = covariates.rows();
    if treatment.len() != n || weights.len() != n {
        return Err(CbpsError::LengthMismatch { treatment: treatment.len(), covariates: n });
    }
    let t_rows: Vec<usize> = (0..n).filter(|&i| treatment[i]).collect();
    let c_rows: Vec<usize> = (0..n).filter(|&i| !treatment[i]).collect();
    if t_rows.is_empty() {
        return Err(CbpsError::EmptyGroup("treated"));
    }
    if c_rows.is_empty() {
        return Err(CbpsError::EmptyGroup("control"));
    }
    let x = covariates.values();
    let mean = |rows: &[usize], j: usize, w: &dyn Fn(usize) -> T| {
        let sw: T = rows.iter().map(|&i| w(i)).sum();
        rows.iter().map(|&i| w(i) * x[(i, j)]).sum::<T>() / sw
    };
    let var = |rows: &[usize], j: usize| {
        let m = mean(rows, j, &|_| T::one());
        if rows.len() < 2 {
            return T::zero();
        }
        rows.iter().map(|&i| (x[(i, j)] - m).powi(2)).sum::<T>() / T::from_usize_lossy(rows.len() - 1)
    };
    let mut out = Vec::new();
    for (j, role) in covariates.roles().iter().enumerate() {
        if *role == ColumnRole::Intercept {
            continue;
        }
        let sd = ((var(&t_rows, j) + var(&c_rows, j)) / T::c(2.0)).sqrt();
        let before = mean(&t_rows, j, &|_| T::one()) - mean(&c_rows, j, &|_| T::one());
        let after = mean(&t_rows, j, &|i| weights[i]) - mean(&c_rows, j, &|i| weights[i]);
        let zero_variance = sd <= T::zero();
        let s = if zero_variance { T::one() } else { sd };
        out.push(CovariateBalance {
            name: covariates.names()[j].clone(),
            std_diff_before: before / s,
            std_diff_after: after / s,
            zero_variance,
        });
    }
    let ess = |rows: &[usize]| {
        let s: T = rows.iter().map(|&i| weights[i]).sum();
        let s2: T = rows.iter().map(|&i| weights[i] * weights[i]).sum();
        s * s / s2
    };
    Ok(BalanceReport {
        covariates: out,
        ess_treated: ess(&t_rows),
        ess_control: ess(&c_rows),
        n_treated: t_rows.len(),
        n_control: c_rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn design(cols: &[Vec<f64>]) -> DesignMatrix<f64> {
        let n = cols[0].len();
        let ones = vec![1.0; n];
        let mut all: Vec<&[f64]> = vec![&ones];
        all.extend(cols.iter().map(Vec::as_slice));
        let mut names = vec!["(intercept)".to_string()];
        names.extend((0..cols.len()).map(|j| format!("x{j}")));
        let mut roles = vec![ColumnRole::Intercept];
        roles.extend(std::iter::repeat_n(ColumnRole::Exogenous, cols.len()));
        DesignMatrix::new(names, roles, Matrix::from_columns(&all)).unwrap()
    }

    #[test]
    fn balanced_covariates_give_uniform_control_weights() {
        let x = vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
        let t = [true, true, true, false, false, false, false, false, false];
        let fit = cbps_weights(&t, &design(&[x])).unwrap();
        for w in &fit.weights[3..] {
            assert!((w - 0.5).abs() < 1e-6, "{w}");
        }
    }

    #[test]
    fn binary_covariate_matches_closed_form_odds() {
        // P(T|x=1) = 0.8 and P(T|x=0) = 0.2 with 10 units per x value
        let mut x = Vec::new();
        let mut t = Vec::new();
        for (xv, treated) in [(1.0, 8), (0.0, 2)] {
            for i in 0..10 {
                x.push(xv);
                t.push(i < treated);
            }
        }
        let fit = cbps_weights(&t, &design(&[x.clone()])).unwrap();
        // controls at x=1 get odds 4, at x=0 odds 1/4, scaled to sum to 10
        let raw = |xv: f64| if xv == 1.0 { 4.0 } else { 0.25 };
        let total: f64 = (0..20).filter(|&i| !t[i]).map(|i| raw(x[i])).sum();
        for i in (0..20).filter(|&i| !t[i]) {
            assert!((fit.weights[i] - raw(x[i]) * 10.0 / total).abs() < 1e-8);
        }
        let tm: f64 = (0..20).filter(|&i| t[i]).map(|i| x[i]).sum::<f64>() / 10.0;
        let cm: f64 = (0..20).filter(|&i| !t[i]).map(|i| fit.weights[i] * x[i]).sum::<f64>() / 10.0;
        assert!((tm - cm).abs() < 1e-6);
    }

    #[test]
    fn separated_groups_are_reported() {
        let x = vec![5.0, 6.0, 7.0, 0.0, 1.0, 2.0];
        let t = [true, true, true, false, false, false];
        assert_eq!(cbps_weights(&t, &design(&[x])).unwrap_err(), CbpsError::PerfectSeparation);
    }

    #[test]
    fn single_treated_unit_has_unit_ess() {
        let x = vec![0.3, 0.0, 1.0, 0.5, 0.2];
        let t = [true, false, false, false, false];
        let w = [1.0, 1.0, 1.0, 1.0, 1.0];
        let r = balance_report(&t, &design(&[x]), &w).unwrap();
        assert_eq!(r.ess_treated, 1.0);
        assert_eq!(r.ess_control, 4.0);
    }

    #[test]
    fn zero_variance_covariate_is_flagged() {
        let x = vec![1.0, 1.0, 1.0, 1.0];
        let z = vec![0.0, 1.0, 0.0, 2.0];
        let t = [true, true, false, false];
        let d = DesignMatrix::new(
            vec!["x".into(), "z".into()],
            vec![ColumnRole::Exogenous; 2],
            Matrix::from_columns(&[&x, &z]),
        )
        .unwrap();
        let r = balance_report(&t, &d, &[1.0; 4]).unwrap();
        assert!(r.covariates[0].zero_variance);
        assert_eq!(r.covariates[0].std_diff_after, 0.0);
    }

    #[test]
    fn frequency_weights_equal_row_duplication() {
        let x = vec![0.0, 1.0, 1.0, 0.0, 1.0, 2.0];
        let t = [true, true, false, false, false, false];
        let f = [2.0, 1.0, 1.0, 3.0, 1.0, 2.0];
        let fw = cbps_weights_with(&t, &design(&[x.clone()]), Some(&f), &CbpsOptions::default()).unwrap();
        let mut xe = Vec::new();
        let mut te = Vec::new();
        let mut src = Vec::new();
        for i in 0..6 {
            for _ in 0..f[i] as usize {
                xe.push(x[i]);
                te.push(t[i]);
                src.push(i);
            }
        }
        let expanded = cbps_weights(&te, &design(&[xe])).unwrap();
        for (e, &i) in src.iter().enumerate() {
            assert!((expanded.weights[e] - fw.weights[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = vec![0.0, 1.0, 2.0, 0.5, 1.5, 0.0, 1.0, 2.0, 3.0, 0.5];
        let t = [true, true, true, true, true, false, false, false, false, false];
        let n = x.len();
        let ones = vec![1.0f32; n];
        let d = DesignMatrix::new(
            vec!["(intercept)".into(), "x".into()],
            vec![ColumnRole::Intercept, ColumnRole::Exogenous],
            Matrix::from_columns(&[&ones, &x]),
        )
        .unwrap();
        let fit = cbps_weights(&t, &d).unwrap();
        let r = balance_report(&t, &d, &fit.weights).unwrap();
        assert!(r.max_abs_std_diff_after() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn affine_rescaling_leaves_weights_unchanged(
            seed in 0u64..10_000, a in 0.1f64..50.0, b in -20.0f64..20.0
        ) {
            let n = 80;
            let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
            let mut next = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s >> 11) as f64 / (1u64 << 53) as f64 };
            let x1: Vec<f64> = (0..n).map(|_| next()).collect();
            let x2: Vec<f64> = (0..n).map(|_| next()).collect();
            let t: Vec<bool> = (0..n).map(|i| next() < 0.3 + 0.3 * x1[i]).collect();
            prop_assume!(t.iter().filter(|v| **v).count() >= 5 && t.iter().filter(|v| !**v).count() >= 5);
            let base = cbps_weights(&t, &design(&[x1.clone(), x2.clone()]));
            prop_assume!(base.is_ok());
            let base = base.unwrap();
            let scaled: Vec<f64> = x1.iter().map(|v| a * v + b).collect();
            let other = cbps_weights(&t, &design(&[scaled, x2])).unwrap();
            for (p, q) in base.weights.iter().zip(&other.weights) {
                prop_assert!((p - q).abs() <= 1e-8 * p.abs().max(1.0));
            }
        }
    }
}
