use crate::stats::{DesignMatrix, Matrix, PivotedQr, StatsError};
use crate::Scalar;

/// Output of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    /// Classical covariance `s^2 (X'X)^-1`.
    pub covariance: Matrix<T>,
    /// `(X'X)^-1`, kept for sandwich estimators.
    pub gram_inverse: Matrix<T>,
    pub dof_model: usize,
    pub dof_residual: usize,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn rss(&self) -> T {
        self.residuals.iter().map(|&e| e * e).sum()
    }

    pub fn fitted(&self, y: &[T]) -> Vec<T> {
        y.iter().zip(&self.residuals).map(|(&y, &e)| y - e).collect()
    }

    /// Uncentred `R^2 = 1 - RSS / y'y`.
    pub fn r_squared_uncentered(&self, y: &[T]) -> T {
        let tss: T = y.iter().map(|&v| v * v).sum();
        if tss == T::zero() {
            T::zero()
        } else {
            T::one() - self.rss() / tss
        }
    }

    /// Centred `R^2 = 1 - RSS / sum (y - mean)^2`.
    pub fn r_squared(&self, y: &[T]) -> T {
        let n = T::from_usize_lossy(y.len());
        let mean = y.iter().copied().sum::<T>() / n;
        let tss: T = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
        if tss == T::zero() {
            T::zero()
        } else {
            T::one() - self.rss() / tss
        }
    }
}

pub(crate) fn rank_checked_qr<T: Scalar>(x: &DesignMatrix<T>) -> Result<PivotedQr<T>, StatsError> {
    let qr = PivotedQr::new(x.values());
    if !qr.is_full_rank() {
        let names = qr.dependent_columns().into_iter().map(|j| x.names()[j].clone()).collect();
        return Err(StatsError::RankDeficient(names));
    }
    Ok(qr)
}

/// Ordinary least squares through a column-pivoted QR.
pub fn ols_fit<T: Scalar>(x: &DesignMatrix<T>, y: &[T]) -> Result<FitResult<T>, StatsError> {
    let n = x.rows();
    if y.len() != n {
        return Err(StatsError::DimensionMismatch { expected: n, found: y.len() });
    }
    let k = x.parameter_count();
    if n < k {
        return Err(StatsError::TooFewObservations { rows: n, params: k });
    }
    let qr = rank_checked_qr(x)?;
    let coefficients = qr.solve_least_squares(y);
    let fitted = x.values().matvec(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let dof_residual = n - k;
    // exactly identified: the fit interpolates and s^2 is undefined
    let s2 = if dof_residual == 0 {
        T::nan()
    } else {
        residuals.iter().map(|&e| e * e).sum::<T>() / T::from_usize_lossy(dof_residual)
    };
    let gram_inverse = qr.gram_inverse();
    let covariance = gram_inverse.scale(s2);
    let dof_model = if x.has_intercept() { k - 1 } else { k };
    Ok(FitResult { coefficients, residuals, covariance, gram_inverse, dof_model, dof_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ColumnRole;

    fn design(rows: &[Vec<f64>]) -> DesignMatrix<f64> {
        DesignMatrix::from_matrix(Matrix::<f64>::from_rows(rows)).unwrap()
    }

    #[test]
    fn interpolates_two_points() {
        let x = design(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let fit = ols_fit(&x, &[2.0, 5.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-14);
        assert_eq!(fit.dof_residual, 0);
        let x = design(&[vec![1.0, 2.0]]);
        assert!(matches!(ols_fit(&x, &[2.0]), Err(StatsError::TooFewObservations { .. })));
    }

    #[test]
    fn constant_outcome_on_intercept() {
        let x = DesignMatrix::single("(intercept)", ColumnRole::Intercept, &[1.0f64; 7]).unwrap();
        let fit = ols_fit(&x, &[4.5; 7]).unwrap();
        assert!((fit.coefficients[0] - 4.5).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-14));
        assert_eq!(fit.dof_model, 0);
        assert_eq!(fit.dof_residual, 6);
    }

    #[test]
    fn recovers_generating_coefficients_without_noise() {
        let rows = vec![
            vec![1.0, 0.5, -1.0],
            vec![1.0, 1.5, 2.0],
            vec![1.0, -0.7, 0.3],
            vec![1.0, 2.2, -2.5],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 3.1, 0.9],
        ];
        let b = [0.25, -1.75, 3.5];
        let y: Vec<f64> = rows.iter().map(|r| r.iter().zip(&b).map(|(a, c)| a * c).sum()).collect();
        let fit = ols_fit(&design(&rows), &y).unwrap();
        for (g, e) in fit.coefficients.iter().zip(&b) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_names_the_dependent_column() {
        let x = DesignMatrix::new(
            vec!["a".into(), "b".into(), "a_plus_b".into()],
            vec![ColumnRole::Exogenous; 3],
            Matrix::<f64>::from_rows(&[
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0],
                vec![1.0, 1.0, 2.0],
                vec![2.0, 1.0, 3.0],
                vec![1.0, 3.0, 4.0],
            ]),
        )
        .unwrap();
        match ols_fit(&x, &[1.0, 2.0, 3.0, 4.0, 5.0]) {
            Err(StatsError::RankDeficient(names)) => assert_eq!(names.len(), 1),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let rows: Vec<Vec<f64>> =
            (0..40).map(|i| vec![1.0, (i as f64).sin() * 3.0, (i as f64 * 0.37).cos()]).collect();
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 1.3).sin() + 0.1 * i as f64).collect();
        let x = design(&rows);
        let fit = ols_fit(&x, &y).unwrap();
        let xe = x.values().tr_matvec(&fit.residuals);
        assert!(xe.iter().all(|v| v.abs() / 40.0 <= 1e-8));
    }
}
