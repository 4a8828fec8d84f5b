use crate::design::EncodedModel;
use crate::iv::IvError;
use crate::stats::dist::f_sf;
use crate::stats::{ols_fit, Matrix, PivotedQr};

/// Inverted Anderson-Rubin test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArConfidenceSet {
    /// Hull of the accepted values.
    Interval { lo: f64, hi: f64 },
    /// Accepted values reach the edge of the widest grid.
    Unbounded,
    Empty,
}

impl ArConfidenceSet {
    /// `(lo, hi)` with infinite bounds for an unbounded set and `None` for
    /// an empty one.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ArConfidenceSet::Interval { lo, hi } => Some((lo, hi)),
            ArConfidenceSet::Unbounded => Some((f64::NEG_INFINITY, f64::INFINITY)),
            ArConfidenceSet::Empty => None,
        }
    }

    pub fn contains(&self, tau: f64) -> bool {
        self.bounds().is_some_and(|(lo, hi)| lo <= tau && tau <= hi)
    }
}

/// Grid used to invert the test, in units of the 2SLS standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArGrid {
    pub half_width_se: f64,
    /// Points per standard error.
    pub step_divisor: f64,
    /// Widening applied once when the first grid is inconclusive.
    pub expand_factor: f64,
    /// Endpoint bisection tolerance.
    pub tol_se: f64,
}

impl Default for ArGrid {
    fn default() -> Self {
        Self { half_width_se: 20.0, step_divisor: 50.0, expand_factor: 5.0, tol_se: 1e-6 }
    }
}

/// Precomputed pieces of the regression of `y - tau0 d` on `[Z, X]`.
///
/// The coefficients and residuals are linear in `tau0`, so the HC1 meat of
/// the instrument block is a quadratic `M_yy - 2 tau0 M_yd + tau0^2 M_dd`.
struct ArKernel {
    gy: Vec<f64>,
    gd: Vec<f64>,
    m_yy: Matrix<f64>,
    m_yd: Matrix<f64>,
    m_dd: Matrix<f64>,
    scale: f64,
    q: usize,
    dof: usize,
}

impl ArKernel {
    fn new(model: &EncodedModel) -> Result<Self, IvError> {
        let w = &model.first_stage_x;
        let n = w.rows();
        let q = model.instruments.cols();
        let k = w.parameter_count();
        if n <= k {
            return Err(IvError::TooFewObservations { n, params: k });
        }
        let fy = ols_fit(w, &model.y)?;
        let fd = ols_fit(w, &model.d)?;
        let z_rows: Vec<usize> = (0..q).collect();
        let all: Vec<usize> = (0..w.cols()).collect();
        let g_z = fy.gram_inverse.select(&z_rows, &all);
        let mut m_yy = Matrix::zeros(q, q);
        let mut m_yd = Matrix::zeros(q, q);
        let mut m_dd = Matrix::zeros(q, q);
        let mut a = vec![0.0; q];
        for i in 0..n {
            let wi = w.values().row(i);
            for (r, ar) in a.iter_mut().enumerate() {
                *ar = g_z.row(r).iter().zip(wi).map(|(g, x)| g * x).sum();
            }
            let (ey, ed) = (fy.residuals[i], fd.residuals[i]);
            for r in 0..q {
                for c in 0..q {
                    let aa = a[r] * a[c];
                    m_yy[(r, c)] += aa * ey * ey;
                    m_yd[(r, c)] += aa * ey * ed;
                    m_dd[(r, c)] += aa * ed * ed;
                }
            }
        }
        Ok(Self {
            gy: fy.coefficients[..q].to_vec(),
            gd: fd.coefficients[..q].to_vec(),
            m_yy,
            m_yd,
            m_dd,
            scale: n as f64 / (n - k) as f64,
            q,
            dof: n - k,
        })
    }

    /// F-scaled robust Wald statistic of `Z` in the regression of
    /// `y - tau0 d` on `[Z, X]`, and its p-value.
    fn stat(&self, tau0: f64) -> (f64, f64) {
        let q = self.q;
        let g: Vec<f64> = self.gy.iter().zip(&self.gd).map(|(y, d)| y - tau0 * d).collect();
        let mut v = Matrix::zeros(q, q);
        for r in 0..q {
            for c in 0..q {
                let m = self.m_yy[(r, c)] - 2.0 * tau0 * self.m_yd[(r, c)] + tau0 * tau0 * self.m_dd[(r, c)];
                v[(r, c)] += self.scale * m;
            }
        }
        let qr = PivotedQr::new(&v);
        let stat = if qr.is_full_rank() {
            let s = qr.solve_square(&g);
            g.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / q as f64
        } else if g.iter().all(|x| *x == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
        (stat, f_sf(stat, q as f64, self.dof as f64))
    }
}

/// Anderson-Rubin statistic and p-value at `tau0`.
pub fn anderson_rubin_stat(model: &EncodedModel, tau0: f64) -> Result<(f64, f64), IvError> {
    Ok(ArKernel::new(model)?.stat(tau0))
}

/// Inverts the Anderson-Rubin test on a grid centred at `tau_hat`.
///
/// A value is accepted when its p-value exceeds `1 - level`. If nothing is
/// accepted, or the accepted set touches the grid edge, the grid is widened
/// once by `expand_factor`. Interior endpoints are refined by bisection.
pub fn ar_confidence_set(
    model: &EncodedModel,
    tau_hat: f64,
    se: f64,
    level: f64,
    grid: &ArGrid,
) -> Result<ArConfidenceSet, IvError> {
    let kernel = ArKernel::new(model)?;
    let alpha = 1.0 - level;
    let accept = |t: f64| kernel.stat(t).1 > alpha;
    let se = if se.is_finite() && se > 0.0 { se } else { tau_hat.abs().max(1.0) };
    let step = se / grid.step_divisor;

    let mut half = grid.half_width_se * se;
    for attempt in 0..2 {
        let n_half = (half / step).round() as i64;
        let points: Vec<f64> = (-n_half..=n_half).map(|i| tau_hat + i as f64 * step).collect();
        let ok: Vec<bool> = points.iter().map(|&t| accept(t)).collect();
        let first = ok.iter().position(|&b| b);
        let last = ok.iter().rposition(|&b| b);
        match (first, last) {
            (Some(f), Some(l)) if f > 0 && l + 1 < points.len() => {
                let tol = grid.tol_se * se;
                let lo = bisect(&accept, points[f - 1], points[f], tol);
                let hi = bisect(&accept, points[l + 1], points[l], tol);
                return Ok(ArConfidenceSet::Interval { lo, hi });
            }
            (None, None) if attempt == 1 => return Ok(ArConfidenceSet::Empty),
            (Some(_), Some(_)) if attempt == 1 => return Ok(ArConfidenceSet::Unbounded),
            _ => half *= grid.expand_factor,
        }
    }
    unreachable!("second attempt always returns")
}

/// Boundary between a rejected point `out` and an accepted point `inside`.
fn bisect(accept: &impl Fn(f64) -> bool, mut out: f64, mut inside: f64, tol: f64) -> f64 {
    while (out - inside).abs() > tol {
        let mid = 0.5 * (out + inside);
        if accept(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{encode, Column, Dataset, EncodeOptions, ModelSpec};
    use crate::stats::{hc1_covariance, wald_joint_test, ColumnRole, DesignMatrix};

    fn data(n: usize, strength: f64) -> Dataset {
        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut z = Vec::new();
        let mut x = Vec::new();
        for i in 0..n {
            let zi = (i % 2) as f64;
            let xi = ((i * 7919) % 101) as f64 / 101.0;
            let u = (((i * 104729) % 997) as f64 / 997.0) - 0.5;
            let di = ((((i * 31) % 17) as f64 / 17.0) + strength * zi + 0.3 * u > 0.8) as u8 as f64;
            y.push(1.0 * di + xi + u);
            d.push(di);
            z.push(zi);
            x.push(xi);
        }
        Dataset::new()
            .with_column("y", Column::from_reals(y))
            .unwrap()
            .with_column("d", Column::from_reals(d))
            .unwrap()
            .with_column("z", Column::from_reals(z))
            .unwrap()
            .with_column("x", Column::from_reals(x))
            .unwrap()
    }

    #[test]
    fn shortcut_matches_explicit_regression() {
        let ds = data(200, 0.5);
        let m = encode(&ds, &ModelSpec::new("y", "d").instruments(["z"]).exogenous(["x"]), &EncodeOptions::default())
            .unwrap();
        for tau0 in [-1.0, 0.0, 0.7, 2.5] {
            let yt: Vec<f64> = m.y.iter().zip(&m.d).map(|(y, d)| y - tau0 * d).collect();
            let fit = ols_fit(&m.first_stage_x, &yt).unwrap();
            let cov = hc1_covariance(&m.first_stage_x, &fit.residuals).unwrap();
            let direct = wald_joint_test(&[0], &fit.coefficients, &cov, fit.dof_residual).unwrap();
            let (s, p) = anderson_rubin_stat(&m, tau0).unwrap();
            assert!((s - direct.statistic).abs() <= 1e-8 * direct.statistic.max(1.0), "{s} vs {}", direct.statistic);
            assert!((p - direct.p_value).abs() < 1e-8);
        }
    }

    #[test]
    fn strong_instrument_gives_bounded_interval_around_estimate() {
        let ds = data(600, 0.6);
        let m = encode(&ds, &ModelSpec::new("y", "d").instruments(["z"]).exogenous(["x"]), &EncodeOptions::default())
            .unwrap();
        let (tau, se) = crate::iv::tsls_encoded(&m, &crate::iv::TslsOptions::without_ar())
            .map(|r| (r.tau_hat, r.se_tau()))
            .unwrap();
        let set = ar_confidence_set(&m, tau, se, 0.95, &ArGrid::default()).unwrap();
        let (lo, hi) = set.bounds().unwrap();
        assert!(lo < tau && tau < hi);
        // the boundary sits at the critical value
        let crit_p = anderson_rubin_stat(&m, lo).unwrap().1;
        assert!((crit_p - 0.05).abs() < 1e-3);
    }

    #[test]
    fn irrelevant_instrument_is_unbounded() {
        let n = 400;
        let z: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let d: Vec<f64> = (0..n).map(|i| ((i / 2) % 2) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let ones = vec![1.0; n];
        let instruments = DesignMatrix::single("z", ColumnRole::Instrument, &z).unwrap();
        let exogenous = DesignMatrix::single("(intercept)", ColumnRole::Intercept, &ones).unwrap();
        let m = EncodedModel {
            first_stage_x: instruments.hstack(&exogenous).unwrap(),
            second_stage_x: DesignMatrix::single("d", ColumnRole::Treatment, &d).unwrap().hstack(&exogenous).unwrap(),
            y,
            d,
            instruments,
            exogenous,
            absorbed: 0,
        };
        let set = ar_confidence_set(&m, 0.0, 1.0, 0.95, &ArGrid::default()).unwrap();
        assert_eq!(set, ArConfidenceSet::Unbounded);
    }
}
