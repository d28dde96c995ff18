//! Sample-splitting procedures: data splitting with mirror statistics, and split-BH.
//!
//! Both split the rows in two random halves, screen features with a
//! cross-validated lasso on the first half and refit OLS on the screened
//! features using the second half.

use super::knockoff::{knockoff_threshold, select_above, ThresholdOffset};
use super::multiple::bh_select;
use super::{BaseRunResult, TIE_TAG};
use crate::error::{Error, Result};
use crate::numerics::{lasso_cv, ols_fit, CvOptions, DenseMatrix, LassoFit, OlsFit, RngStream};

const SPLIT_TAG: u64 = 11;
const CV_TAG: u64 = 12;

/// Lasso screening on one half and OLS on the other.
struct SplitFit {
    lasso: LassoFit,
    /// Screened features in ascending order.
    support: Vec<usize>,
    ols: OlsFit,
}

fn split_fit(x: &DenseMatrix, y: &[f64], cv: &CvOptions, rng: &mut RngStream) -> Result<SplitFit> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {} rows", y.len(), n)));
    }
    if n < 4 {
        return Err(Error::InvalidArgument(format!("sample splitting needs n >= 4, got {n}")));
    }
    let perm = rng.substream(SPLIT_TAG).permutation(n);
    let mut first = perm[..n / 2].to_vec();
    let mut second = perm[n / 2..].to_vec();
    first.sort_unstable();
    second.sort_unstable();

    let x1 = x.select_rows(&first);
    let y1: Vec<f64> = first.iter().map(|&i| y[i]).collect();
    let lasso = lasso_cv(&x1, &y1, cv, &mut rng.substream(CV_TAG))?;

    // OLS with an intercept on the second half can take at most n2 - 2 columns.
    let cap = second.len().saturating_sub(2);
    let mut support = lasso.support();
    if support.len() > cap {
        let b = &lasso.coefficients;
        support.sort_by(|&i, &j| b[j].abs().total_cmp(&b[i].abs()).then(i.cmp(&j)));
        support.truncate(cap);
        support.sort_unstable();
    }

    let x2 = x.select_rows(&second).select_columns(&support);
    let y2: Vec<f64> = second.iter().map(|&i| y[i]).collect();
    let ols = ols_fit(&x2, &y2, true)?;
    Ok(SplitFit { lasso, support, ols })
}

/// Mirror statistic `sign(b₁b₂)·|b₁|·|b₂|`.
#[inline]
pub fn mirror_stat(b1: f64, b2: f64) -> f64 {
    b1 * b2
}

/// One data-splitting run with mirror statistics and the offset-0 threshold.
pub fn ds_run(x: &DenseMatrix, y: &[f64], q: f64, rng: &mut RngStream) -> Result<BaseRunResult> {
    ds_run_with(x, y, q, ThresholdOffset::Zero, &CvOptions::default(), rng)
}

pub(crate) fn ds_run_with(
    x: &DenseMatrix,
    y: &[f64],
    q: f64,
    offset: ThresholdOffset,
    cv: &CvOptions,
    rng: &mut RngStream,
) -> Result<BaseRunResult> {
    let fit = split_fit(x, y, cv, rng)?;
    let mut t = vec![0.0; x.cols()];
    for (a, &j) in fit.support.iter().enumerate() {
        t[j] = mirror_stat(fit.lasso.coefficients[j], fit.ols.coefficients[a]);
    }
    let tau = knockoff_threshold(&t, q, offset);
    let selected = select_above(&t, tau);
    Ok(BaseRunResult::from_selection(t, selected, q, &mut rng.substream(TIE_TAG)))
}

/// One split-BH run: second-half OLS p-values on the screened set, BH at `q`.
pub fn splitbh_run(x: &DenseMatrix, y: &[f64], q: f64, rng: &mut RngStream) -> Result<BaseRunResult> {
    splitbh_run_with(x, y, q, &CvOptions::default(), rng)
}

pub(crate) fn splitbh_run_with(
    x: &DenseMatrix,
    y: &[f64],
    q: f64,
    cv: &CvOptions,
    rng: &mut RngStream,
) -> Result<BaseRunResult> {
    let fit = split_fit(x, y, cv, rng)?;
    let mut pvals = vec![1.0; x.cols()];
    for (a, &j) in fit.support.iter().enumerate() {
        pvals[j] = fit.ols.pvalues[a];
    }
    let selected = bh_select(&pvals, q);
    let t: Vec<f64> = pvals.iter().map(|p| -p).collect();
    let mut run = BaseRunResult::from_selection(t, selected, q, &mut rng.substream(TIE_TAG));
    run.pvalues = Some(pvals);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_formula() {
        assert!((mirror_stat(0.5, 0.4) - 0.2).abs() < 1e-15);
        assert!((mirror_stat(0.5, -0.4) + 0.2).abs() < 1e-15);
        assert_eq!(mirror_stat(0.0, 3.0), 0.0);
    }

    fn design(n: usize, p: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed, 99);
        let mut v = vec![0.0; n * p];
        rng.fill_normal(&mut v);
        DenseMatrix::from_vec(n, p, v).unwrap()
    }

    #[test]
    fn splitbh_screened_out_have_unit_pvalue() {
        let x = design(120, 30, 1);
        let mut rng = RngStream::new(2, 0);
        let y: Vec<f64> = (0..120).map(|i| 3.0 * x[(i, 4)] + rng.normal()).collect();
        let run = splitbh_run(&x, &y, 0.1, &mut rng).unwrap();
        let p = run.pvalues.as_ref().unwrap();
        for j in 0..30 {
            if p[j] == 1.0 {
                assert_eq!(run.stats[j], -1.0);
            }
        }
        assert!(run.selected.contains(4));
    }

    #[test]
    fn ds_runs_are_deterministic_and_consistent() {
        let x = design(100, 20, 3);
        let mut noise = RngStream::new(4, 0);
        let y: Vec<f64> = (0..100).map(|i| 2.0 * x[(i, 0)] - 2.0 * x[(i, 1)] + noise.normal()).collect();
        let a = ds_run(&x, &y, 0.1, &mut RngStream::new(7, 1)).unwrap();
        let b = ds_run(&x, &y, 0.1, &mut RngStream::new(7, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.selected.len(), a.s_hat);
        let total: f64 = a.run_evalues.iter().sum();
        if a.s_hat > 0 {
            assert!((total - 20.0 / 0.1).abs() < 1e-9);
        }
        assert!(a.selected.contains(0) && a.selected.contains(1));
    }

    #[test]
    fn too_few_rows_rejected() {
        let x = design(3, 2, 5);
        assert!(ds_run(&x, &[1.0, 2.0, 3.0], 0.1, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn wide_screening_is_truncated() {
        // p far above n/2; the lasso support can exceed what OLS can fit.
        let x = design(24, 60, 6);
        let mut noise = RngStream::new(8, 0);
        let y: Vec<f64> = (0..24).map(|i| (0..60).map(|j| x[(i, j)]).sum::<f64>() + noise.normal()).collect();
        for s in 0..5 {
            let run = splitbh_run(&x, &y, 0.2, &mut RngStream::new(s, 0)).unwrap();
            let screened = run.pvalues.unwrap().iter().filter(|&&p| p < 1.0).count();
            assert!(screened <= 10);
        }
    }
}
