//! Dense matrices and a column-pivoted Householder QR.
//!
//! Only what the estimators need: products, transposes, rank-revealing
//! least squares and the inverse Gram matrix `(X'X)^-1` recovered from `R`.

use crate::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns(columns: &[&[T]]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for c in columns {
                data.push(c[i]);
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `X' v` without materialising the transpose.
    pub fn tr_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        out
    }

    /// `X' diag(w) X`.
    pub fn weighted_gram(&self, w: &[T]) -> Self {
        assert_eq!(self.rows, w.len(), "weighted_gram dimension mismatch");
        let k = self.cols;
        let mut g = Self::zeros(k, k);
        for (i, &wi) in w.iter().enumerate() {
            let r = self.row(i);
            for a in 0..k {
                let ra = r[a] * wi;
                if ra == T::zero() {
                    continue;
                }
                for b in a..k {
                    g.data[a * k + b] += ra * r[b];
                }
            }
        }
        g.symmetrize_upper();
        g
    }

    pub fn gram(&self) -> Self {
        self.weighted_gram(&vec![T::one(); self.rows])
    }

    /// Copies the upper triangle into the lower one.
    pub fn symmetrize_upper(&mut self) {
        let k = self.cols;
        for a in 0..k {
            for b in (a + 1)..k {
                self.data[b * k + a] = self.data[a * k + b];
            }
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// Sub-matrix at the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self[(i, j)]);
            }
        }
        Self { rows: rows.len(), cols: cols.len(), data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let all: Vec<usize> = (0..self.cols).collect();
        self.select(rows, &all)
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Self { rows: self.rows, cols, data }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR with column pivoting, `X P = Q R`.
///
/// The numerical rank is the number of leading diagonal entries of `R` whose
/// magnitude exceeds `tol * |R[0,0]|`.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    n: usize,
    k: usize,
    // column-major n x k; R in the upper triangle, reflectors below
    packed: Vec<T>,
    tau: Vec<T>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(x: &Matrix<T>) -> Self {
        Self::with_tolerance(x, T::rank_tolerance())
    }

    pub fn with_tolerance(x: &Matrix<T>, rel_tol: T) -> Self {
        let (n, k) = (x.rows(), x.cols());
        let mut a = vec![T::zero(); n * k];
        for i in 0..n {
            for j in 0..k {
                a[j * n + i] = x[(i, j)];
            }
        }
        let mut perm: Vec<usize> = (0..k).collect();
        let mut tau = vec![T::zero(); k.min(n)];
        let steps = k.min(n);
        let mut rank = steps;
        let mut r00 = T::zero();

        for j in 0..steps {
            // pivot: remaining column with the largest trailing norm
            let mut best = j;
            let mut best_norm = T::neg_infinity();
            for c in j..k {
                let col = &a[c * n + j..(c + 1) * n];
                let s: T = col.iter().map(|&v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = c;
                }
            }
            if best != j {
                for i in 0..n {
                    a.swap(j * n + i, best * n + i);
                }
                perm.swap(j, best);
            }

            let col = &mut a[j * n + j..(j + 1) * n];
            let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
            if j == 0 {
                r00 = norm;
            }
            if norm == T::zero() || norm <= rel_tol * r00 {
                rank = j;
                break;
            }
            let alpha = if col[0] > T::zero() { -norm } else { norm };
            let v0 = col[0] - alpha;
            for v in col.iter_mut().skip(1) {
                *v /= v0;
            }
            tau[j] = -v0 / alpha;
            col[0] = alpha;

            // apply H = I - tau v v' to the trailing columns
            let (head, tail) = a.split_at_mut((j + 1) * n);
            let v = &head[j * n + j..(j + 1) * n];
            for c in 0..(k - j - 1) {
                let target = &mut tail[c * n + j..(c + 1) * n];
                let mut dot = target[0];
                for (t, &vv) in target[1..].iter().zip(&v[1..]) {
                    dot += *t * vv;
                }
                dot *= tau[j];
                target[0] -= dot;
                for (t, &vv) in target[1..].iter_mut().zip(&v[1..]) {
                    *t -= dot * vv;
                }
            }
        }

        Self { n, k, packed: a, tau, perm, rank }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.k
    }

    /// Column permutation: position `p` of the factorisation holds original
    /// column `permutation()[p]`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Original indices of the columns found linearly dependent on the rest.
    pub fn dependent_columns(&self) -> Vec<usize> {
        let mut d = self.perm[self.rank..].to_vec();
        d.sort_unstable();
        d
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> T {
        self.packed[j * self.n + i]
    }

    /// Overwrites `b` with `Q' b`.
    pub fn apply_qt(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        for j in 0..self.rank {
            let v = &self.packed[j * self.n + j..(j + 1) * self.n];
            let mut dot = b[j];
            for (bb, &vv) in b[j + 1..].iter().zip(&v[1..]) {
                dot += *bb * vv;
            }
            dot *= self.tau[j];
            b[j] -= dot;
            for (bb, &vv) in b[j + 1..].iter_mut().zip(&v[1..]) {
                *bb -= dot * vv;
            }
        }
    }

    /// Least-squares solution of `X b = y`. Requires full column rank.
    pub fn solve_least_squares(&self, y: &[T]) -> Vec<T> {
        assert!(self.is_full_rank(), "least squares on rank-deficient factorisation");
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut z = qty[..self.k].to_vec();
        self.back_substitute(&mut z);
        let mut b = vec![T::zero(); self.k];
        for (p, &orig) in self.perm.iter().enumerate() {
            b[orig] = z[p];
        }
        b
    }

    fn back_substitute(&self, z: &mut [T]) {
        for i in (0..self.k).rev() {
            let mut s = z[i];
            for j in (i + 1)..self.k {
                s -= self.r(i, j) * z[j];
            }
            z[i] = s / self.r(i, i);
        }
    }

    /// `(X'X)^-1` in the original column order. Requires full column rank.
    pub fn gram_inverse(&self) -> Matrix<T> {
        assert!(self.is_full_rank(), "gram inverse on rank-deficient factorisation");
        let k = self.k;
        // R^-1, upper triangular
        let mut rinv = Matrix::zeros(k, k);
        for col in 0..k {
            let mut e = vec![T::zero(); k];
            e[col] = T::one();
            for i in (0..=col).rev() {
                let mut s = e[i];
                for j in (i + 1)..=col {
                    s -= self.r(i, j) * e[j];
                }
                e[i] = s / self.r(i, i);
            }
            for (i, &v) in e.iter().enumerate().take(col + 1) {
                rinv[(i, col)] = v;
            }
        }
        // (R'R)^-1 = R^-1 R^-T
        let mut inv_p = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let mut s = T::zero();
                for c in b..k {
                    s += rinv[(a, c)] * rinv[(b, c)];
                }
                inv_p[(a, b)] = s;
                inv_p[(b, a)] = s;
            }
        }
        let mut out = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                out[(self.perm[a], self.perm[b])] = inv_p[(a, b)];
            }
        }
        out
    }

    /// Solves the square system `A x = b` for the factorised `A`.
    pub fn solve_square(&self, b: &[T]) -> Vec<T> {
        assert_eq!(self.n, self.k, "solve_square needs a square matrix");
        self.solve_least_squares(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_solves_square_system() {
        let a = Matrix::<f64>::from_rows(&[
            vec![4.0, 1.0, 2.0],
            vec![1.0, 3.0, 0.0],
            vec![2.0, 0.0, 5.0],
        ]);
        let x = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let qr = PivotedQr::new(&a);
        let got = qr.solve_square(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_inverse_matches_identity_product() {
        let x = Matrix::<f64>::from_rows(&[
            vec![1.0, 0.3, 2.0],
            vec![1.0, -1.0, 0.5],
            vec![1.0, 2.5, -1.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.1, 3.3],
        ]);
        let inv = PivotedQr::new(&x).gram_inverse();
        let prod = x.gram().matmul(&inv);
        let eye = Matrix::<f64>::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[(i, j)] - eye[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn detects_collinear_column() {
        let x = Matrix::<f64>::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 5.0, 6.0],
            vec![1.0, -1.0, 0.0],
        ]);
        let qr = PivotedQr::new(&x);
        assert_eq!(qr.rank(), 2);
        assert_eq!(qr.dependent_columns().len(), 1);
    }

    #[test]
    fn works_in_single_precision() {
        let x = Matrix::<f32>::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let y = [1.0f32, 3.0, 5.0];
        let b = PivotedQr::new(&x).solve_least_squares(&y);
        assert!((b[0] - 1.0).abs() < 1e-5);
        assert!((b[1] - 2.0).abs() < 1e-5);
    }
}
