//! Linear algebra, sampling, penalized regression and distribution functions.

pub mod dist;
pub mod lasso;
pub mod matrix;
pub mod ols;
pub mod rng;

pub use dist::{quantile, student_t_sf};
pub use lasso::{lambda_max, lasso_cv, lasso_fit, CvOptions, LassoFit, LassoOptions};
pub use matrix::{cholesky, materialize_covariance, CovarianceSpec, DenseMatrix};
pub use ols::{ols_fit, ols_pvalues, OlsFit};
pub use rng::{mix_seed, RngStream};

/// `n` i.i.d. rows from `N(mean, L·Lᵀ)`.
pub fn sample_mvn(mean: &[f64], chol_lower: &DenseMatrix, n: usize, rng: &mut RngStream) -> DenseMatrix {
    let p = chol_lower.rows();
    assert_eq!(mean.len(), p, "mean length must match the factor");
    let mut z = DenseMatrix::zeros(n, p);
    rng.fill_normal(z.as_mut_slice());
    let mut x = z.matmul_t(chol_lower);
    if mean.iter().any(|&m| m != 0.0) {
        for i in 0..n {
            for (v, m) in x.row_mut(i).iter_mut().zip(mean) {
                *v += m;
            }
        }
    }
    x
}
