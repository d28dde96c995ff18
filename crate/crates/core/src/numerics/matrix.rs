//! Dense row-major matrices and the handful of factorizations the pipeline needs.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, values }
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
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        DenseMatrix { rows: idx.len(), cols: self.cols, values }
    }

    /// Columns at the given indices, in order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        let mut values = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        DenseMatrix { rows: self.rows, cols: idx.len(), values }
    }

    /// `[self, other]` side by side.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "hstack of {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut values = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
        }
        Ok(DenseMatrix { rows: self.rows, cols, values })
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        gemm(self.rows, self.cols, rhs.cols, &self.values, false, &rhs.values, false, &mut out.values, 0.0);
        out
    }

    /// `self · rhsᵀ`.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, rhs.rows);
        gemm(self.rows, self.cols, rhs.rows, &self.values, false, &rhs.values, true, &mut out.values, 0.0);
        out
    }

    /// `selfᵀ · self` (cols × cols).
    pub fn gram(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.cols);
        gemm(self.cols, self.rows, self.cols, &self.values, true, &self.values, false, &mut out.values, 0.0);
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `c = a·b + beta·c` on row-major buffers, with optional transposes.
/// `a` is m×k after the transpose, `b` is k×n after the transpose.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches given these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = sigma`.
pub fn cholesky(sigma: &DenseMatrix) -> Result<DenseMatrix> {
    let n = sigma.rows();
    if sigma.cols() != n {
        return Err(Error::DimensionMismatch(format!("cholesky of {}x{}", n, sigma.cols())));
    }
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let (done, rest) = l.values.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let s = sigma[(i, j)] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let pivot = sigma[(i, i)] - dot(&row_i[..i], &row_i[..i]);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: i, pivot });
        }
        row_i[i] = pivot.sqrt();
    }
    Ok(l)
}

/// Solves `L·x = b` in place for lower-triangular `L`.
pub(crate) fn forward_solve(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let s = b[i] - dot(&row[..i], &b[..i]);
        b[i] = s / row[i];
    }
}

/// Solves `Lᵀ·x = b` in place for lower-triangular `L`.
pub(crate) fn backward_solve_t(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in (0..n).rev() {
        b[i] /= l[(i, i)];
        let bi = b[i];
        let row = l.row(i);
        for k in 0..i {
            b[k] -= row[k] * bi;
        }
    }
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub(crate) fn spd_inverse(l: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        forward_solve(l, &mut e);
        backward_solve_t(l, &mut e);
        for i in 0..n {
            inv[(i, j)] = e[i];
        }
    }
    inv
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(sym: &DenseMatrix) -> f64 {
    let n = sym.rows();
    if n == 0 {
        return f64::INFINITY;
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, sym.as_slice());
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Population covariance structures used by the simulation designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceSpec {
    Identity,
    /// `Σ_ij = rho` off the diagonal.
    CompoundSymmetry { rho: f64 },
    /// Block diagonal; inside a block `Σ_ij = rho^|i-j|`, zero across blocks.
    BlockToeplitz { rho: f64, block_size: usize },
}

pub const DEFAULT_TOEPLITZ_BLOCK: usize = 50;

impl CovarianceSpec {
    pub fn block_toeplitz(rho: f64) -> Self {
        CovarianceSpec::BlockToeplitz { rho, block_size: DEFAULT_TOEPLITZ_BLOCK }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            CovarianceSpec::Identity => 0.0,
            CovarianceSpec::CompoundSymmetry { rho } | CovarianceSpec::BlockToeplitz { rho, .. } => rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::CompoundSymmetry { rho } => check_rho(rho),
            CovarianceSpec::BlockToeplitz { rho, block_size } => {
                if block_size == 0 {
                    return Err(Error::InvalidArgument("block_size must be >= 1".into()));
                }
                check_rho(rho)
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {rho}")))
    }
}

/// Dense `p × p` matrix for a covariance spec. A trailing partial Toeplitz block has size `p % block_size`.
pub fn materialize_covariance(spec: &CovarianceSpec, p: usize) -> DenseMatrix {
    match *spec {
        CovarianceSpec::Identity => DenseMatrix::identity(p),
        CovarianceSpec::CompoundSymmetry { rho } => {
            DenseMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
        }
        CovarianceSpec::BlockToeplitz { rho, block_size } => {
            let b = block_size.max(1);
            DenseMatrix::from_fn(p, p, |i, j| {
                if i / b != j / b {
                    0.0
                } else {
                    rho.powi(i.abs_diff(j) as i32)
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(l, DenseMatrix::identity(3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let s = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(0, 1)], 0.0);
        assert_abs_diff_eq!(l[(1, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], 0.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn cholesky_rejects_duplicated_columns() {
        // rho = 1 compound symmetry: every column identical.
        let s = DenseMatrix::from_fn(3, 3, |_, _| 1.0);
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn cholesky_reconstructs_covariances() {
        for spec in [
            CovarianceSpec::Identity,
            CovarianceSpec::CompoundSymmetry { rho: 0.9 },
            CovarianceSpec::BlockToeplitz { rho: 0.9, block_size: 50 },
            CovarianceSpec::BlockToeplitz { rho: 0.5, block_size: 7 },
        ] {
            for p in [1, 13, 120] {
                let s = materialize_covariance(&spec, p);
                let l = cholesky(&s).unwrap();
                assert!(l.matmul_t(&l).max_abs_diff(&s) <= 1e-10, "{spec:?} p={p}");
            }
        }
    }

    #[test]
    fn compound_symmetry_two() {
        let s = materialize_covariance(&CovarianceSpec::CompoundSymmetry { rho: 0.5 }, 2);
        assert_eq!(s.as_slice(), &[1.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn block_toeplitz_partial_block() {
        let s = materialize_covariance(&CovarianceSpec::BlockToeplitz { rho: 0.4, block_size: 2 }, 3);
        assert_eq!(s.as_slice(), &[1.0, 0.4, 0.0, 0.4, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn identity_spec() {
        assert_eq!(materialize_covariance(&CovarianceSpec::Identity, 4), DenseMatrix::identity(4));
    }

    #[test]
    fn inverse_and_eigen() {
        let s = materialize_covariance(&CovarianceSpec::CompoundSymmetry { rho: 0.5 }, 2);
        let inv = spd_inverse(&cholesky(&s).unwrap());
        assert!(inv.matmul(&s).max_abs_diff(&DenseMatrix::identity(2)) < 1e-14);
        assert_abs_diff_eq!(min_eigenvalue(&s), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gemm_transposes() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let g = a.gram();
        assert_eq!(g.as_slice(), &[17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        let aat = a.matmul_t(&a);
        assert_eq!(aat.as_slice(), &[14.0, 32.0, 32.0, 77.0]);
        assert_eq!(a.matmul(&a.transpose()), aat);
        assert_eq!(a.t_matvec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(DenseMatrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }
}
