//! Ordinary least squares with an intercept, and two-sided coefficient p-values.

use super::dist::student_t_sf;
use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Relative pivot size below which a column counts as collinear.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// One entry per input column; dropped columns hold 0.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Two-sided t-test p-values; dropped columns hold 1.
    pub pvalues: Vec<f64>,
    /// Columns removed as collinear with earlier ones.
    pub dropped: Vec<usize>,
    pub df: f64,
}

/// Two-sided t-test p-values for each column of `x`, intercept included.
pub fn ols_pvalues(x: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let fit = ols_fit(x, y, false)?;
    Ok(fit.pvalues)
}

/// Fits OLS; with `drop_collinear` set, columns whose Cholesky pivot vanishes
/// are removed instead of raising `SingularDesign`.
pub fn ols_fit(x: &DenseMatrix, y: &[f64], drop_collinear: bool) -> Result<OlsFit> {
    let n = x.rows();
    let k = x.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {} rows", y.len(), n)));
    }
    if k == 0 {
        let intercept = if n > 0 { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
        return Ok(OlsFit {
            coefficients: vec![],
            intercept,
            pvalues: vec![],
            dropped: vec![],
            df: n as f64 - 1.0,
        });
    }
    if n <= k + 1 {
        return Err(Error::InvalidArgument(format!(
            "OLS with intercept needs n > k + 1 (n = {n}, k = {k})"
        )));
    }

    let nf = n as f64;
    let mut means = vec![0.0; k];
    for i in 0..n {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);
    let y_mean = y.iter().sum::<f64>() / nf;

    let mut xc = x.clone();
    for i in 0..n {
        for (v, m) in xc.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let gram = xc.gram();
    let xty = xc.t_matvec(&yc);

    // Cholesky over kept columns, dropping any whose pivot collapses.
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    let mut l_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let cjj = gram[(j, j)];
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (a, &c) in kept.iter().enumerate() {
            let s = gram[(j, c)] - dot(&row[..a], &l_rows[a][..a]);
            row.push(s / l_rows[a][a]);
        }
        let pivot = cjj - dot(&row, &row);
        if !(cjj > 0.0) || pivot <= PIVOT_TOL * cjj {
            if drop_collinear {
                dropped.push(j);
                continue;
            }
            return Err(Error::SingularDesign { column: j });
        }
        row.push(pivot.sqrt());
        l_rows.push(row);
        kept.push(j);
    }

    let r = kept.len();
    let mut l = DenseMatrix::zeros(r, r);
    for (a, row) in l_rows.iter().enumerate() {
        l.row_mut(a)[..=a].copy_from_slice(row);
    }
    let mut beta: Vec<f64> = kept.iter().map(|&c| xty[c]).collect();
    super::matrix::forward_solve(&l, &mut beta);
    super::matrix::backward_solve_t(&l, &mut beta);

    let mut rss = 0.0;
    for i in 0..n {
        let row = xc.row(i);
        let fitted: f64 = kept.iter().zip(&beta).map(|(&c, b)| row[c] * b).sum();
        let e = yc[i] - fitted;
        rss += e * e;
    }
    let df = (n - r - 1) as f64;
    let sigma2 = rss / df;

    // diag((LLᵀ)⁻¹) = column sums of squares of L⁻¹.
    let mut inv_diag = vec![0.0; r];
    let mut e = vec![0.0; r];
    for a in 0..r {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[a] = 1.0;
        super::matrix::forward_solve(&l, &mut e);
        inv_diag[a] = e.iter().map(|v| v * v).sum();
    }

    let mut coefficients = vec![0.0; k];
    let mut pvalues = vec![1.0; k];
    for (a, &c) in kept.iter().enumerate() {
        coefficients[c] = beta[a];
        let se = (sigma2 * inv_diag[a]).sqrt();
        pvalues[c] = if se > 0.0 {
            (2.0 * student_t_sf((beta[a] / se).abs(), df)).min(1.0)
        } else if beta[a] != 0.0 {
            0.0
        } else {
            1.0
        };
    }
    let intercept = y_mean - dot(&coefficients, &means);
    Ok(OlsFit { coefficients, intercept, pvalues, dropped, df })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use approx::assert_abs_diff_eq;

    fn random_design(n: usize, k: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed, 0);
        let mut v = vec![0.0; n * k];
        rng.fill_normal(&mut v);
        DenseMatrix::from_vec(n, k, v).unwrap()
    }

    #[test]
    fn perfect_fit_gives_zero_pvalue() {
        let x = random_design(30, 3, 1);
        let y = x.column(1);
        let p = ols_pvalues(&x, &y).unwrap();
        assert!(p[1] < 1e-12, "{p:?}");
    }

    #[test]
    fn empty_design() {
        let x = DenseMatrix::zeros(10, 0);
        assert!(ols_pvalues(&x, &[0.0; 10]).unwrap().is_empty());
    }

    #[test]
    fn recovers_coefficients() {
        let x = random_design(200, 3, 2);
        let y: Vec<f64> = (0..200).map(|i| 1.5 + 2.0 * x[(i, 0)] - x[(i, 2)]).collect();
        let fit = ols_fit(&x, &y, false).unwrap();
        assert_abs_diff_eq!(fit.intercept, 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coefficients[1], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coefficients[2], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn simple_regression_matches_textbook() {
        // x = 1..5, y = (1, 3, 2, 5, 4): slope 0.8, se = sqrt(RSS/3 / Sxx) with RSS = 3.6, Sxx = 10.
        let x = DenseMatrix::from_vec(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let fit = ols_fit(&x, &[1.0, 3.0, 2.0, 5.0, 4.0], false).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 0.8, epsilon = 1e-12);
        let t = 0.8 / (3.6f64 / 3.0 / 10.0).sqrt();
        assert_abs_diff_eq!(fit.pvalues[0], 2.0 * student_t_sf(t, 3.0), epsilon = 1e-12);
    }

    #[test]
    fn collinear_column_is_singular_or_dropped() {
        let mut x = random_design(40, 3, 3);
        for i in 0..40 {
            x[(i, 2)] = 2.0 * x[(i, 0)] - x[(i, 1)];
        }
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)]).collect();
        assert_eq!(ols_pvalues(&x, &y), Err(Error::SingularDesign { column: 2 }));
        let fit = ols_fit(&x, &y, true).unwrap();
        assert_eq!(fit.dropped, vec![2]);
        assert_eq!(fit.pvalues[2], 1.0);
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn too_few_rows() {
        let x = random_design(3, 2, 4);
        assert!(ols_pvalues(&x, &[1.0, 2.0, 3.0]).is_err());
    }
}
