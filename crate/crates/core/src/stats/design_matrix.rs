use crate::stats::{Matrix, StatsError};
use crate::Scalar;

/// What a design column stands for in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnRole {
    Outcome,
    Treatment,
    Instrument,
    Exogenous,
    Intercept,
}

/// Named numeric regressor matrix.
///
/// `absorbed` counts parameters that were partialled out before the matrix
/// was built (fixed-effect groups, the absorbed intercept). They do not
/// appear as columns but still consume residual degrees of freedom.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T> {
    names: Vec<String>,
    roles: Vec<ColumnRole>,
    values: Matrix<T>,
    absorbed: usize,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(
        names: Vec<String>,
        roles: Vec<ColumnRole>,
        values: Matrix<T>,
    ) -> Result<Self, StatsError> {
        if names.len() != values.cols() || roles.len() != values.cols() {
            return Err(StatsError::DimensionMismatch {
                expected: values.cols(),
                found: names.len().max(roles.len()),
            });
        }
        let intercepts = roles.iter().filter(|r| **r == ColumnRole::Intercept).count();
        if intercepts > 1 {
            return Err(StatsError::MultipleIntercepts);
        }
        for j in 0..values.cols() {
            if (0..values.rows()).all(|i| values[(i, j)] == T::zero()) && values.rows() > 0 {
                return Err(StatsError::ZeroColumn(names[j].clone()));
            }
        }
        Ok(Self { names, roles, values, absorbed: 0 })
    }

    /// All columns exogenous, named `x0, x1, ...`.
    pub fn from_matrix(values: Matrix<T>) -> Result<Self, StatsError> {
        let k = values.cols();
        Self::new(
            (0..k).map(|j| format!("x{j}")).collect(),
            vec![ColumnRole::Exogenous; k],
            values,
        )
    }

    pub fn with_absorbed(mut self, absorbed: usize) -> Self {
        self.absorbed = absorbed;
        self
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn absorbed(&self) -> usize {
        self.absorbed
    }

    /// Parameters consumed: explicit columns plus absorbed ones.
    #[inline]
    pub fn parameter_count(&self) -> usize {
        self.cols() + self.absorbed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn columns_with_role(&self, role: ColumnRole) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| **r == role).map(|(j, _)| j).collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.roles.contains(&ColumnRole::Intercept) || self.absorbed > 0
    }

    /// Appends the columns of `other` (same row count). Absorbed counts are
    /// taken from `self`.
    pub fn hstack(&self, other: &DesignMatrix<T>) -> Result<Self, StatsError> {
        if self.rows() != other.rows() {
            return Err(StatsError::DimensionMismatch { expected: self.rows(), found: other.rows() });
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut roles = self.roles.clone();
        roles.extend(other.roles.iter().copied());
        Ok(Self::new(names, roles, self.values.hstack(&other.values))?.with_absorbed(self.absorbed))
    }

    /// Single named column as a design.
    pub fn single(name: &str, role: ColumnRole, values: &[T]) -> Result<Self, StatsError> {
        Self::new(
            vec![name.to_string()],
            vec![role],
            Matrix::from_row_major(values.len(), 1, values.to_vec()),
        )
    }
}
