use crate::stats::ols::rank_checked_qr;
use crate::stats::{DesignMatrix, Matrix, StatsError};
use crate::Scalar;

/// Sandwich `(X'X)^-1 X' diag(e^2) X (X'X)^-1` scaled by `n / (n - k)`.
///
/// `k` counts absorbed parameters as well as explicit columns.
pub fn hc1_covariance<T: Scalar>(x: &DesignMatrix<T>, residuals: &[T]) -> Result<Matrix<T>, StatsError> {
    let n = x.rows();
    if residuals.len() != n {
        return Err(StatsError::DimensionMismatch { expected: n, found: residuals.len() });
    }
    let k = x.parameter_count();
    if n <= k {
        return Err(StatsError::TooFewObservations { rows: n, params: k });
    }
    let bread = rank_checked_qr(x)?.gram_inverse();
    Ok(hc1_with_bread(x.values(), &bread, residuals, k))
}

/// HC1 sandwich for a precomputed `(X'X)^-1`.
pub fn hc1_with_bread<T: Scalar>(x: &Matrix<T>, bread: &Matrix<T>, residuals: &[T], params: usize) -> Matrix<T> {
    let n = x.rows();
    let e2: Vec<T> = residuals.iter().map(|&e| e * e).collect();
    let meat = x.weighted_gram(&e2);
    let mut v = bread.matmul(&meat).matmul(bread);
    v.symmetrize_upper();
    v.scale(T::from_usize_lossy(n) / T::from_usize_lossy(n - params))
}

/// Classical `s^2 (X'X)^-1` with `s^2 = e'e / (n - k)`.
pub fn classical_covariance<T: Scalar>(x: &DesignMatrix<T>, residuals: &[T]) -> Result<Matrix<T>, StatsError> {
    let n = x.rows();
    let k = x.parameter_count();
    if n <= k {
        return Err(StatsError::TooFewObservations { rows: n, params: k });
    }
    let bread = rank_checked_qr(x)?.gram_inverse();
    let s2 = residuals.iter().map(|&e| e * e).sum::<T>() / T::from_usize_lossy(n - k);
    Ok(bread.scale(s2))
}

/// Square roots of the diagonal.
pub fn standard_errors<T: Scalar>(cov: &Matrix<T>) -> Vec<T> {
    cov.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ols_fit, ColumnRole};

    /// Direct evaluation of the triple product, one scalar at a time.
    fn brute_force_hc1(x: &Matrix<f64>, e: &[f64]) -> Matrix<f64> {
        let (n, k) = (x.rows(), x.cols());
        let mut xtx = Matrix::<f64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                xtx[(a, b)] = (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum();
            }
        }
        let inv = gauss_jordan_inverse(&xtx);
        let mut meat = Matrix::<f64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] = (0..n).map(|i| x[(i, a)] * e[i] * e[i] * x[(i, b)]).sum();
            }
        }
        let mut out = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0f64;
                for c in 0..k {
                    for d in 0..k {
                        s += inv[(a, c)] * meat[(c, d)] * inv[(d, b)];
                    }
                }
                out[(a, b)] = s * n as f64 / (n - k) as f64;
            }
        }
        out
    }

    fn gauss_jordan_inverse(a: &Matrix<f64>) -> Matrix<f64> {
        let k = a.rows();
        let mut aug: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut r: Vec<f64> = a.row(i).to_vec();
                r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs())).unwrap();
            aug.swap(c, p);
            let d = aug[c][c];
            aug[c].iter_mut().for_each(|v| *v /= d);
            for r in 0..k {
                if r != c {
                    let f = aug[r][c];
                    let pivot = aug[c].clone();
                    aug[r].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        Matrix::<f64>::from_rows(&aug.into_iter().map(|r| r[k..].to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn intercept_only_equal_magnitude_residuals() {
        let c = 0.7f64;
        let e = [c, -c, c, -c, c, c];
        let x = DesignMatrix::single("(intercept)", ColumnRole::Intercept, &[1.0; 6]).unwrap();
        let v = hc1_covariance(&x, &e).unwrap();
        let n = 6.0;
        assert!((v[(0, 0)] - c * c * n / (n - 1.0) / n).abs() < 1e-15);
    }

    #[test]
    fn five_row_example_matches_triple_product() {
        let rows = vec![
            vec![1.0, 0.2, -1.0],
            vec![1.0, 1.7, 0.4],
            vec![1.0, -0.6, 2.2],
            vec![1.0, 2.9, -0.8],
            vec![1.0, 0.1, 1.1],
        ];
        let x = DesignMatrix::from_matrix(Matrix::<f64>::from_rows(&rows)).unwrap();
        let y = [0.3, 2.1, -1.4, 3.3, 0.0];
        let fit = ols_fit(&x, &y).unwrap();
        let v = hc1_covariance(&x, &fit.residuals).unwrap();
        let oracle = brute_force_hc1(x.values(), &fit.residuals);
        for a in 0..3 {
            for b in 0..3 {
                let scale = oracle[(a, b)].abs().max(1e-300);
                assert!((v[(a, b)] - oracle[(a, b)]).abs() / scale < 1e-10);
            }
        }
    }

    #[test]
    fn equal_squared_residuals_reduce_to_scaled_classical() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, i as f64, ((i * i) % 5) as f64]).collect();
        let x = DesignMatrix::from_matrix(Matrix::<f64>::from_rows(&rows)).unwrap();
        let e: Vec<f64> = (0..8).map(|i| if i % 3 == 0 { 1.5 } else { -1.5 }).collect();
        let hc1 = hc1_covariance(&x, &e).unwrap();
        let classical = classical_covariance(&x, &e).unwrap();
        // unadjusted sigma^2 = e'e / n
        let bread = crate::stats::PivotedQr::new(x.values()).gram_inverse();
        let unadjusted = bread.scale(1.5 * 1.5);
        for a in 0..3 {
            for b in 0..3 {
                let tol = 1e-12 * classical[(a, b)].abs().max(1e-12);
                assert!((hc1[(a, b)] - classical[(a, b)]).abs() <= tol);
                assert!((hc1[(a, b)] - unadjusted[(a, b)] * 8.0 / 5.0).abs() <= tol);
            }
        }
    }
}
