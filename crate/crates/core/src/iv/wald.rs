use crate::iv::IvError;
use crate::stats::{bootstrap, BootstrapSpec, Resampling};

/// Below this first stage the ratio is reported as undefined.
pub const MIN_FIRST_STAGE: f64 = 1e-12;

/// Wald (ratio) estimate with the complier decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldResult {
    pub tau_hat: f64,
    pub se_bootstrap: f64,
    /// `E[d|z=1] - E[d|z=0]`, the complier share under monotonicity.
    pub first_stage: f64,
    /// `E[y|z=1] - E[y|z=0]`.
    pub reduced_form: f64,
    pub p_d: f64,
    pub p_z: f64,
    /// `P(complier | d = 1)`.
    pub compliers_given_treated: f64,
    /// `P(complier | d = 0)`.
    pub compliers_given_untreated: f64,
    pub n_obs: usize,
    /// Shares falling outside `[0, 1]` (evidence of defiers) are reported
    /// here and left unclamped.
    pub warnings: Vec<String>,
}

/// Complier shares among the treated and the untreated implied by
/// `P(d)`, `P(z)` and the first stage:
/// `P(c|d=1) = pi_c P(z=1) / P(d=1)`, `P(c|d=0) = pi_c P(z=0) / P(d=0)`.
pub fn complier_shares(p_d: f64, p_z: f64, first_stage: f64) -> (f64, f64) {
    (first_stage * p_z / p_d, first_stage * (1.0 - p_z) / (1.0 - p_d))
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    first_stage: f64,
    reduced_form: f64,
    p_d: f64,
    p_z: f64,
}

fn moments(rows: impl Iterator<Item = usize>, y: &[f64], d: &[bool], z: &[bool]) -> Result<Moments, IvError> {
    let (mut n1, mut n0) = (0usize, 0usize);
    let (mut y1, mut y0, mut d1, mut d0) = (0.0, 0.0, 0.0, 0.0);
    for i in rows {
        let dv = d[i] as u8 as f64;
        if z[i] {
            n1 += 1;
            y1 += y[i];
            d1 += dv;
        } else {
            n0 += 1;
            y0 += y[i];
            d0 += dv;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(IvError::DegenerateInstrument);
    }
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    Ok(Moments {
        first_stage: d1 / n1f - d0 / n0f,
        reduced_form: y1 / n1f - y0 / n0f,
        p_d: (d1 + d0) / (n1f + n0f),
        p_z: n1f / (n1f + n0f),
    })
}

fn ratio(m: &Moments) -> Result<f64, IvError> {
    if m.first_stage.abs() < MIN_FIRST_STAGE {
        return Err(IvError::ZeroFirstStage);
    }
    Ok(m.reduced_form / m.first_stage)
}

/// Ratio estimate `(E[y|z=1] - E[y|z=0]) / (E[d|z=1] - E[d|z=0])` with a
/// row bootstrap standard error (`replicates = 0` skips the bootstrap).
pub fn wald_estimate(y: &[f64], d: &[bool], z: &[bool], replicates: usize, seed: u64) -> Result<WaldResult, IvError> {
    let n = y.len();
    if d.len() != n || z.len() != n {
        return Err(IvError::LengthMismatch);
    }
    let m = moments(0..n, y, d, z)?;
    let tau_hat = ratio(&m)?;
    let (c1, c0) = complier_shares(m.p_d, m.p_z, m.first_stage);

    let mut warnings = Vec::new();
    for (label, v) in [("first stage", m.first_stage), ("P(complier|d=1)", c1), ("P(complier|d=0)", c0)] {
        if !(0.0..=1.0).contains(&v) {
            let msg = format!("{label} = {v:.4} outside [0, 1]; monotonicity (no defiers) is doubtful");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let se_bootstrap = if replicates == 0 {
        f64::NAN
    } else {
        let spec = BootstrapSpec::new(replicates, seed);
        let res = bootstrap(Resampling::IidRows { n }, &spec, |r| {
            let mm = moments(r.rows.iter().copied(), y, d, z)?;
            ratio(&mm).map(|t| vec![t])
        })?;
        res.se[0]
    };

    Ok(WaldResult {
        tau_hat,
        se_bootstrap,
        first_stage: m.first_stage,
        reduced_form: m.reduced_form,
        p_d: m.p_d,
        p_z: m.p_z,
        compliers_given_treated: c1,
        compliers_given_untreated: c0,
        n_obs: n,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_multiple_births_2002() {
        let (c1, c0) = complier_shares(0.16, 0.01, 0.85);
        assert!((c1 - 0.05).abs() <= 0.02);
        assert!((c0 - 1.00).abs() <= 0.02);
    }

    #[test]
    fn table_two_same_sex_2002() {
        let (c1, c0) = complier_shares(0.16, 0.51, 0.03);
        assert!((0.08 - 0.02..=0.10 + 0.02).contains(&c1), "{c1}");
        assert!((c0 - 0.02).abs() <= 0.02);
    }

    #[test]
    fn equal_reduced_form_gives_zero_effect() {
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let d = [true, false, true, true, false, false, false, false];
        let z = [true, true, true, true, false, false, false, false];
        let w = wald_estimate(&y, &d, &z, 0, 0).unwrap();
        assert_eq!(w.tau_hat, 0.0);
    }

    #[test]
    fn twelve_row_hand_enumeration() {
        // z = 1 rows: y = 3,1,4,1,5,9 ; d = 1,1,0,1,0,1
        // z = 0 rows: y = 2,6,5,3,5,8 ; d = 0,1,0,0,0,0
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        let d = [true, true, false, true, false, true, false, true, false, false, false, false];
        let z = [true, true, true, true, true, true, false, false, false, false, false, false];
        let w = wald_estimate(&y, &d, &z, 0, 0).unwrap();
        // (23/6 - 29/6) / (4/6 - 1/6) = (-1) / (1/2)
        assert_eq!(w.reduced_form, 23.0 / 6.0 - 29.0 / 6.0);
        assert!((w.tau_hat - (-2.0)).abs() < 1e-14);
        assert_eq!(w.p_z, 0.5);
        assert!((w.p_d - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(
            wald_estimate(&y, &[true, false, true], &[true, true, true], 0, 0),
            Err(IvError::DegenerateInstrument)
        ));
        assert!(matches!(
            wald_estimate(&y, &[true, true, true], &[true, false, true], 0, 0),
            Err(IvError::ZeroFirstStage)
        ));
    }

    #[test]
    fn defier_rich_data_warns_without_clamping() {
        // instrument lowers take-up: negative first stage
        let y = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let d = [false, false, false, true, true, true];
        let z = [true, true, true, false, false, false];
        let w = wald_estimate(&y, &d, &z, 0, 0).unwrap();
        assert!(w.first_stage < 0.0);
        assert!(!w.warnings.is_empty());
    }

    #[test]
    fn bootstrap_se_is_reproducible() {
        let n = 300;
        let z: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let d: Vec<bool> = (0..n).map(|i| (i % 2 == 0 && i % 3 != 0) || i % 7 == 0).collect();
        let y: Vec<f64> = (0..n).map(|i| (i % 5) as f64 * 0.1 + d[i] as u8 as f64 * 0.3).collect();
        let a = wald_estimate(&y, &d, &z, 200, 11).unwrap();
        let b = wald_estimate(&y, &d, &z, 200, 11).unwrap();
        assert_eq!(a.se_bootstrap, b.se_bootstrap);
        assert!(a.se_bootstrap > 0.0);
    }
}
