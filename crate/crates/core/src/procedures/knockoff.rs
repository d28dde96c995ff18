//! Model-X Gaussian knockoffs with lasso coefficient-difference statistics.

use super::{BaseRunResult, SelectionSet, TIE_TAG};
use crate::error::{Error, Result};
use crate::numerics::matrix::{min_eigenvalue, spd_inverse};
use crate::numerics::{cholesky, lasso_cv, CvOptions, DenseMatrix, RngStream};

const KNOCKOFF_TAG: u64 = 1;
const SWAP_TAG: u64 = 2;
const CV_TAG: u64 = 3;

/// Default fraction of the largest equicorrelated `s`. At the boundary
/// `s = 2λ_min` the joint design is singular and the knockoffs can rebuild
/// the originals exactly (e.g. `X_j + X̃_j` is constant in `j` under compound symmetry).
pub const DEFAULT_S_SCALE: f64 = 0.9;

const S_SHRINK: f64 = 1e-6;
const S_MAX_SHRINKS: usize = 10;

/// Numerator offset of the knockoff-style ratio `(offset + #{W ≤ -t}) / #{W ≥ t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdOffset {
    Zero,
    One,
}

impl ThresholdOffset {
    fn value(self) -> f64 {
        match self {
            ThresholdOffset::Zero => 0.0,
            ThresholdOffset::One => 1.0,
        }
    }
}

/// Equicorrelated Gaussian knockoff sampler for a fixed covariance `Σ`.
///
/// `X̃ = X(I - Σ⁻¹D) + Z·Lᵀ` with `L·Lᵀ = 2D - DΣ⁻¹D` and `D = diag(s)`.
#[derive(Debug, Clone)]
pub struct KnockoffSampler {
    s: Vec<f64>,
    /// `I - Σ⁻¹D`.
    mean_map: DenseMatrix,
    cond_chol: DenseMatrix,
}

impl KnockoffSampler {
    /// `s_j = DEFAULT_S_SCALE · min(1, 2λ_min(R)) · Σ_jj` with `R` the correlation matrix.
    pub fn new(sigma: &DenseMatrix) -> Result<Self> {
        Self::with_scale(sigma, DEFAULT_S_SCALE)
    }

    /// `s_j = s_scale · min(1, 2λ_min(R)) · Σ_jj`, shrunk in steps of `1e-6` if the
    /// conditional covariance is not positive definite.
    pub fn with_scale(sigma: &DenseMatrix, s_scale: f64) -> Result<Self> {
        let p = sigma.rows();
        if sigma.cols() != p {
            return Err(Error::DimensionMismatch(format!("covariance is {}x{}", p, sigma.cols())));
        }
        let sigma_inv = spd_inverse(&cholesky(sigma)?);
        let scale: Vec<f64> = (0..p).map(|j| sigma[(j, j)].sqrt()).collect();
        let corr = DenseMatrix::from_fn(p, p, |i, j| sigma[(i, j)] / (scale[i] * scale[j]));
        let base = s_scale * (2.0 * min_eigenvalue(&corr)).min(1.0);

        let mut factor = 1.0;
        let mut last_err = None;
        for _ in 0..=S_MAX_SHRINKS {
            let s: Vec<f64> = (0..p).map(|j| base * factor * sigma[(j, j)]).collect();
            // DΣ⁻¹D and 2D - DΣ⁻¹D.
            let cond = DenseMatrix::from_fn(p, p, |i, j| {
                let v = -s[i] * sigma_inv[(i, j)] * s[j];
                if i == j {
                    v + 2.0 * s[i]
                } else {
                    v
                }
            });
            match cholesky(&cond) {
                Ok(cond_chol) => {
                    let mean_map = DenseMatrix::from_fn(p, p, |i, j| {
                        let v = -sigma_inv[(i, j)] * s[j];
                        if i == j {
                            1.0 + v
                        } else {
                            v
                        }
                    });
                    return Ok(KnockoffSampler { s, mean_map, cond_chol });
                }
                Err(e) => {
                    last_err = Some(e);
                    factor -= S_SHRINK;
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn p(&self) -> usize {
        self.s.len()
    }

    pub fn sample(&self, x: &DenseMatrix, rng: &mut RngStream) -> Result<DenseMatrix> {
        let p = self.p();
        if x.cols() != p {
            return Err(Error::DimensionMismatch(format!("X has {} columns, covariance is {p}x{p}", x.cols())));
        }
        let mut z = vec![0.0; x.rows() * p];
        rng.fill_normal(&mut z);
        let z = DenseMatrix::from_vec(x.rows(), p, z)?;
        let mut out = x.matmul(&self.mean_map);
        let noise = z.matmul_t(&self.cond_chol);
        out.as_mut_slice().iter_mut().zip(noise.as_slice()).for_each(|(o, e)| *o += e);
        Ok(out)
    }
}

/// Draws one knockoff copy of `x` for covariance `sigma`.
pub fn gaussian_knockoffs(x: &DenseMatrix, sigma: &DenseMatrix, rng: &mut RngStream) -> Result<DenseMatrix> {
    KnockoffSampler::new(sigma)?.sample(x, rng)
}

/// `W_j = |β̂_j| - |β̂_{j+p}|` from one cross-validated lasso on `[X, X̃]`.
///
/// Each original/knockoff pair is swapped at random before fitting so that
/// solver order cannot favour either column; an exact duplicate pair gets `W_j = 0`.
pub fn knockoff_stats(x: &DenseMatrix, x_knock: &DenseMatrix, y: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    knockoff_stats_with(x, x_knock, y, &CvOptions::default(), rng)
}

pub(crate) fn knockoff_stats_with(
    x: &DenseMatrix,
    x_knock: &DenseMatrix,
    y: &[f64],
    cv: &CvOptions,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (n, p) = (x.rows(), x.cols());
    if x_knock.rows() != n || x_knock.cols() != p {
        return Err(Error::DimensionMismatch(format!(
            "X is {n}x{p}, knockoffs are {}x{}",
            x_knock.rows(),
            x_knock.cols()
        )));
    }
    let mut swap_rng = rng.substream(SWAP_TAG);
    let swapped: Vec<bool> = (0..p).map(|_| swap_rng.coin()).collect();
    let mut aug = DenseMatrix::zeros(n, 2 * p);
    for i in 0..n {
        let (xr, kr) = (x.row(i), x_knock.row(i));
        let row = aug.row_mut(i);
        for j in 0..p {
            let (a, b) = if swapped[j] { (kr[j], xr[j]) } else { (xr[j], kr[j]) };
            row[j] = a;
            row[j + p] = b;
        }
    }
    let fit = lasso_cv(&aug, y, cv, &mut rng.substream(CV_TAG))?;
    let b = &fit.coefficients;
    Ok((0..p)
        .map(|j| {
            if (0..n).all(|i| x[(i, j)] == x_knock[(i, j)]) {
                return 0.0;
            }
            let (orig, knock) = if swapped[j] { (b[j + p], b[j]) } else { (b[j], b[j + p]) };
            orig.abs() - knock.abs()
        })
        .collect())
}

/// Smallest `t ∈ {|W_j| : W_j ≠ 0}` with `(offset + #{W ≤ -t}) / max(#{W ≥ t}, 1) ≤ q`,
/// or `+∞` when no candidate qualifies.
pub fn knockoff_threshold(w: &[f64], q: f64, offset: ThresholdOffset) -> f64 {
    let mut cand: Vec<f64> = w.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let mut pos: Vec<f64> = w.iter().copied().filter(|&v| v > 0.0).collect();
    let mut neg: Vec<f64> = w.iter().filter(|&&v| v < 0.0).map(|v| -v).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let (mut ip, mut ineg) = (0, 0);
    for &t in &cand {
        while ip < pos.len() && pos[ip] < t {
            ip += 1;
        }
        while ineg < neg.len() && neg[ineg] < t {
            ineg += 1;
        }
        let n_pos = (pos.len() - ip).max(1) as f64;
        let n_neg = (neg.len() - ineg) as f64;
        if (offset.value() + n_neg) / n_pos <= q {
            return t;
        }
    }
    f64::INFINITY
}

/// Knockoff e-values `p·1{W_i ≥ τ} / (1 + #{W ≤ -τ})` at the knockoff+ threshold for `q_kn`.
pub fn rb_evalues(w: &[f64], q_kn: f64) -> Vec<f64> {
    let p = w.len();
    let tau = knockoff_threshold(w, q_kn, ThresholdOffset::One);
    if tau.is_infinite() {
        return vec![0.0; p];
    }
    let denom = 1.0 + w.iter().filter(|&&v| v <= -tau).count() as f64;
    w.iter().map(|&v| if v >= tau { p as f64 / denom } else { 0.0 }).collect()
}

/// `{j : W_j ≥ τ}`; empty when `τ = +∞`.
pub(crate) fn select_above(w: &[f64], tau: f64) -> SelectionSet {
    SelectionSet::from_sorted((0..w.len()).filter(|&j| w[j] >= tau).collect(), w.len())
}

/// One knockoff run: fresh knockoff copy, statistics, knockoff+ selection at `q`.
pub fn knockoff_run(
    x: &DenseMatrix,
    y: &[f64],
    sigma: &DenseMatrix,
    q: f64,
    rng: &mut RngStream,
) -> Result<BaseRunResult> {
    let sampler = KnockoffSampler::new(sigma)?;
    knockoff_run_with(x, y, &sampler, q, q / 2.0, &CvOptions::default(), rng)
}

pub(crate) fn knockoff_run_with(
    x: &DenseMatrix,
    y: &[f64],
    sampler: &KnockoffSampler,
    q: f64,
    q_kn: f64,
    cv: &CvOptions,
    rng: &mut RngStream,
) -> Result<BaseRunResult> {
    let x_knock = sampler.sample(x, &mut rng.substream(KNOCKOFF_TAG))?;
    knockoff_run_given(x, &x_knock, y, q, q_kn, cv, rng)
}

/// Knockoff run with the knockoff copy supplied by the caller.
pub(crate) fn knockoff_run_given(
    x: &DenseMatrix,
    x_knock: &DenseMatrix,
    y: &[f64],
    q: f64,
    q_kn: f64,
    cv: &CvOptions,
    rng: &mut RngStream,
) -> Result<BaseRunResult> {
    let w = knockoff_stats_with(x, x_knock, y, cv, rng)?;
    let tau = knockoff_threshold(&w, q, ThresholdOffset::One);
    let selected = select_above(&w, tau);
    let rb = rb_evalues(&w, q_kn);
    let mut run = BaseRunResult::from_selection(w, selected, q, &mut rng.substream(TIE_TAG));
    run.rb_evalues = Some(rb);
    Ok(run)
}
