//! Lasso by cyclic coordinate descent on standardized columns.
//!
//! The solver works on the standardized Gram matrix ("covariance updates"):
//! the gradient `z - G·b` is kept current for every coordinate, so each
//! update costs one row of `G` and checking the optimality conditions of
//! inactive coordinates is free. Cross-validation builds each fold's Gram
//! matrix from raw cross-products by subtracting the held-out rows.

use super::matrix::{gemm, DenseMatrix};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Fitted lasso model on the original column scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Columns with zero variance; their coefficients are forced to 0.
    pub zero_variance: Vec<usize>,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len()).filter(|&j| self.coefficients[j] != 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once no standardized coefficient moves by more than `sqrt(tol·‖ỹ‖²/n)` in a pass.
    pub tol: f64,
    /// Cap on coordinate passes per penalty value.
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-6, max_iter: 2_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub n_folds: usize,
    pub n_lambdas: usize,
    /// Smallest penalty on the path as a fraction of `lambda_max`.
    pub lambda_ratio: f64,
    pub lasso: LassoOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { n_folds: 5, n_lambdas: 50, lambda_ratio: 1e-3, lasso: LassoOptions::default() }
    }
}

/// Penalties past the current CV minimum explored before the path is cut.
const CV_PATIENCE: usize = 8;

/// Raw first and second moments of a (pre-centered) design and response.
#[derive(Clone)]
struct Moments {
    n: usize,
    sx: Vec<f64>,
    sy: f64,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: f64,
}

impl Moments {
    fn of_rows(x: &DenseMatrix, y: &[f64], rows: &[usize]) -> Moments {
        let p = x.cols();
        let sub = x.select_rows(rows);
        let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let mut sxx = vec![0.0; p * p];
        gemm(p, rows.len(), p, sub.as_slice(), true, sub.as_slice(), false, &mut sxx, 0.0);
        let mut sx = vec![0.0; p];
        let mut sxy = vec![0.0; p];
        for (r, &yi) in ys.iter().enumerate() {
            for ((a, b), &v) in sx.iter_mut().zip(sxy.iter_mut()).zip(sub.row(r)) {
                *a += v;
                *b += v * yi;
            }
        }
        Moments {
            n: rows.len(),
            sx,
            sy: ys.iter().sum(),
            sxx,
            sxy,
            syy: ys.iter().map(|v| v * v).sum(),
        }
    }

    fn minus(&self, other: &Moments) -> Moments {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u - v).collect::<Vec<_>>();
        Moments {
            n: self.n - other.n,
            sx: sub(&self.sx, &other.sx),
            sy: self.sy - other.sy,
            sxx: sub(&self.sxx, &other.sxx),
            sxy: sub(&self.sxy, &other.sxy),
            syy: self.syy - other.syy,
        }
    }

    fn plus_assign(&mut self, other: &Moments) {
        self.n += other.n;
        self.sy += other.sy;
        self.syy += other.syy;
        for (a, b) in self.sx.iter_mut().zip(&other.sx) {
            *a += b;
        }
        for (a, b) in self.sxy.iter_mut().zip(&other.sxy) {
            *a += b;
        }
        for (a, b) in self.sxx.iter_mut().zip(&other.sxx) {
            *a += b;
        }
    }
}

/// Standardized least-squares problem `(1/2n)‖ỹ - X̃b‖² + λ‖b‖₁`.
struct Problem {
    p: usize,
    gram: Vec<f64>,
    z: Vec<f64>,
    /// `‖ỹ‖²/n`.
    yy: f64,
    x_mean: Vec<f64>,
    y_mean: f64,
    /// Column standard deviations (1/n convention); 0 marks a degenerate column.
    sd: Vec<f64>,
}

impl Problem {
    fn from_moments(m: Moments) -> Problem {
        let p = m.sx.len();
        let n = m.n as f64;
        let x_mean: Vec<f64> = m.sx.iter().map(|v| v / n).collect();
        let y_mean = m.sy / n;
        let mut sd = vec![0.0; p];
        for j in 0..p {
            let raw = m.sxx[j * p + j] / n;
            let var = raw - x_mean[j] * x_mean[j];
            if var > 1e-12 * raw && var > 0.0 {
                sd[j] = var.sqrt();
            }
        }
        let mut gram = m.sxx;
        for j in 0..p {
            let row = &mut gram[j * p..(j + 1) * p];
            if sd[j] == 0.0 {
                row.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            for k in 0..p {
                row[k] = if sd[k] == 0.0 {
                    0.0
                } else {
                    (row[k] / n - x_mean[j] * x_mean[k]) / (sd[j] * sd[k])
                };
            }
            row[j] = 1.0;
        }
        let z = (0..p)
            .map(|j| if sd[j] == 0.0 { 0.0 } else { (m.sxy[j] / n - x_mean[j] * y_mean) / sd[j] })
            .collect();
        let yy = (m.syy / n - y_mean * y_mean).max(0.0);
        Problem { p, gram, z, yy, x_mean, y_mean, sd }
    }

    fn lambda_max(&self) -> f64 {
        self.z.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    fn zero_variance(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.sd[j] == 0.0).collect()
    }

    /// Original-scale coefficients and intercept from standardized ones.
    fn unstandardize(&self, b: &[f64], global_mean: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> =
            b.iter().zip(&self.sd).map(|(&bj, &s)| if s == 0.0 { 0.0 } else { bj / s }).collect();
        // Means here are of the pre-centered design; shift back to the caller's scale.
        let intercept = self.y_mean
            - beta.iter().zip(self.x_mean.iter().zip(global_mean)).map(|(b, (m, g))| b * (m + g)).sum::<f64>();
        (beta, intercept)
    }
}

/// Coordinate-descent state carried along a penalty path.
struct Solver<'a> {
    prob: &'a Problem,
    beta: Vec<f64>,
    grad: Vec<f64>,
    active: Vec<usize>,
    in_active: Vec<bool>,
}

impl<'a> Solver<'a> {
    fn new(prob: &'a Problem) -> Self {
        Solver {
            prob,
            beta: vec![0.0; prob.p],
            grad: prob.z.clone(),
            active: Vec::new(),
            in_active: vec![false; prob.p],
        }
    }

    #[inline]
    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let p = self.prob.p;
        if self.prob.sd[j] == 0.0 {
            return 0.0;
        }
        let old = self.beta[j];
        let u = self.grad[j] + old;
        let new = soft_threshold(u, lambda);
        if new == old {
            return 0.0;
        }
        let d = new - old;
        self.beta[j] = new;
        let row = &self.prob.gram[j * p..(j + 1) * p];
        for (g, gk) in self.grad.iter_mut().zip(row) {
            *g -= gk * d;
        }
        if !self.in_active[j] {
            self.in_active[j] = true;
            self.active.push(j);
        }
        d.abs()
    }

    fn full_pass(&mut self, lambda: f64) -> f64 {
        let mut max_d: f64 = 0.0;
        for j in 0..self.prob.p {
            // Inactive coordinates satisfying |grad| <= lambda stay at zero.
            if self.beta[j] == 0.0 && self.grad[j].abs() <= lambda {
                continue;
            }
            max_d = max_d.max(self.update(j, lambda));
        }
        max_d
    }

    fn active_pass(&mut self, lambda: f64) -> f64 {
        let mut max_d: f64 = 0.0;
        for a in 0..self.active.len() {
            let j = self.active[a];
            max_d = max_d.max(self.update(j, lambda));
        }
        max_d
    }

    /// Solves at `lambda` from the current state. Returns (passes, converged).
    fn solve(&mut self, lambda: f64, opts: &LassoOptions) -> (usize, bool) {
        let tol = (opts.tol * self.prob.yy).sqrt();
        let mut passes = 0;
        loop {
            let d = self.full_pass(lambda);
            passes += 1;
            if d <= tol {
                return (passes, true);
            }
            if passes >= opts.max_iter {
                return (passes, false);
            }
            loop {
                let d = self.active_pass(lambda);
                passes += 1;
                if d <= tol {
                    break;
                }
                if passes >= opts.max_iter {
                    return (passes, false);
                }
            }
        }
    }

    /// Fraction of `‖ỹ‖²` explained by the current coefficients.
    fn dev_ratio(&self) -> f64 {
        if self.prob.yy <= 0.0 {
            return 0.0;
        }
        let mut bz = 0.0;
        let mut bg = 0.0;
        for &j in &self.active {
            bz += self.beta[j] * self.prob.z[j];
            bg += self.beta[j] * self.grad[j];
        }
        let rss = self.prob.yy - bz - bg;
        1.0 - rss / self.prob.yy
    }
}

#[inline]
fn soft_threshold(u: f64, lambda: f64) -> f64 {
    if u > lambda {
        u - lambda
    } else if u < -lambda {
        u + lambda
    } else {
        0.0
    }
}

fn check_inputs(x: &DenseMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!("{} responses for {} rows", y.len(), x.rows())));
    }
    if x.rows() < 2 {
        return Err(Error::DegenerateInput(format!("lasso needs at least 2 rows, got {}", x.rows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite response".into()));
    }
    Ok(())
}

/// Centers the design by its column means; returns the centered copy and the means.
fn center_columns(x: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let n = x.rows() as f64;
    let p = x.cols();
    let mut means = vec![0.0; p];
    for i in 0..x.rows() {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut xc = x.clone();
    for i in 0..x.rows() {
        for (v, m) in xc.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    (xc, means)
}

fn ensure_some_variance(prob: &Problem) -> Result<()> {
    if prob.p > 0 && prob.sd.iter().all(|&s| s == 0.0) {
        return Err(Error::DegenerateInput("every column has zero variance".into()));
    }
    Ok(())
}

/// Minimizes `(1/2n)‖y - Xβ‖² + λ‖β‖₁` over standardized columns.
pub fn lasso_fit(x: &DenseMatrix, y: &[f64], lambda: f64, opts: &LassoOptions) -> Result<LassoFit> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let (xc, means) = center_columns(x);
    let all: Vec<usize> = (0..x.rows()).collect();
    let prob = Problem::from_moments(Moments::of_rows(&xc, y, &all));
    ensure_some_variance(&prob)?;
    let mut solver = Solver::new(&prob);
    let (passes, converged) = solver.solve(lambda, opts);
    let (coefficients, intercept) = prob.unstandardize(&solver.beta, &means);
    Ok(LassoFit {
        coefficients,
        intercept,
        lambda,
        n_iterations: passes,
        converged,
        zero_variance: prob.zero_variance(),
    })
}

/// `max_j |X̃ⱼᵀỹ|/n` on standardized, centered columns: the smallest penalty with an all-zero fit.
pub fn lambda_max(x: &DenseMatrix, y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let (xc, _) = center_columns(x);
    let all: Vec<usize> = (0..x.rows()).collect();
    Ok(Problem::from_moments(Moments::of_rows(&xc, y, &all)).lambda_max())
}

/// Cross-validated lasso: picks the penalty on a log-spaced path that
/// minimizes mean out-of-fold squared error, then returns the full-data fit there.
pub fn lasso_cv(x: &DenseMatrix, y: &[f64], opts: &CvOptions, rng: &mut RngStream) -> Result<LassoFit> {
    check_inputs(x, y)?;
    let n = x.rows();
    let k = opts.n_folds;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} folds for {n} rows")));
    }
    if opts.n_lambdas == 0 {
        return Err(Error::InvalidArgument("empty penalty path".into()));
    }

    let perm = rng.permutation(n);
    let mut folds: Vec<Vec<usize>> = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &row) in perm.iter().enumerate() {
        folds[pos % k].push(row);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());

    let (xc, means) = center_columns(x);
    let fold_moments: Vec<Moments> = folds.iter().map(|f| Moments::of_rows(&xc, y, f)).collect();
    let mut total = Moments {
        n: 0,
        sx: vec![0.0; x.cols()],
        sy: 0.0,
        sxx: vec![0.0; x.cols() * x.cols()],
        sxy: vec![0.0; x.cols()],
        syy: 0.0,
    };
    for m in &fold_moments {
        total.plus_assign(m);
    }

    let full = Problem::from_moments(total.clone());
    ensure_some_variance(&full)?;
    let zero_variance = full.zero_variance();
    let lam_max = full.lambda_max();
    if lam_max <= 0.0 {
        let (coefficients, intercept) = full.unstandardize(&vec![0.0; x.cols()], &means);
        return Ok(LassoFit { coefficients, intercept, lambda: 0.0, n_iterations: 0, converged: true, zero_variance });
    }
    let lambdas = log_path(lam_max, opts.lambda_ratio, opts.n_lambdas);

    // Walk the path with all fold solvers in step; stop once the fits saturate
    // or no new CV minimum has appeared for CV_PATIENCE penalties.
    let train: Vec<Problem> = fold_moments.iter().map(|m| Problem::from_moments(total.minus(m))).collect();
    let mut solvers: Vec<Solver<'_>> = train.iter().map(Solver::new).collect();
    let mut best = (0, f64::INFINITY);
    let mut prev_ratio = 0.0;
    for (idx, &lam) in lambdas.iter().enumerate() {
        let mut sse = 0.0;
        let mut ratio = f64::INFINITY;
        for ((s, prob), rows) in solvers.iter_mut().zip(&train).zip(&folds) {
            s.solve(lam, &opts.lasso);
            sse += holdout_sse(prob, s, &xc, y, rows);
            ratio = ratio.min(s.dev_ratio());
        }
        if sse < best.1 {
            best = (idx, sse);
        }
        if idx >= best.0 + CV_PATIENCE || ratio > 0.999 || (idx > 0 && ratio - prev_ratio < 1e-5 * ratio) {
            break;
        }
        prev_ratio = ratio;
    }
    let best = best.0;

    let mut solver = Solver::new(&full);
    let (mut passes, mut converged) = (0, true);
    for &lam in &lambdas[..=best] {
        (passes, converged) = solver.solve(lam, &opts.lasso);
    }
    let (coefficients, intercept) = full.unstandardize(&solver.beta, &means);
    Ok(LassoFit { coefficients, intercept, lambda: lambdas[best], n_iterations: passes, converged, zero_variance })
}

fn holdout_sse(train: &Problem, s: &Solver<'_>, xc: &DenseMatrix, y: &[f64], rows: &[usize]) -> f64 {
    let coefs: Vec<(usize, f64)> = s
        .active
        .iter()
        .filter(|&&j| s.beta[j] != 0.0)
        .map(|&j| (j, s.beta[j] / train.sd[j]))
        .collect();
    let offset: f64 = train.y_mean - coefs.iter().map(|&(j, b)| b * train.x_mean[j]).sum::<f64>();
    rows.iter()
        .map(|&i| {
            let row = xc.row(i);
            let pred = offset + coefs.iter().map(|&(j, b)| b * row[j]).sum::<f64>();
            let e = y[i] - pred;
            e * e
        })
        .sum()
}

/// `count` penalties log-spaced from `max` down to `max·ratio`.
pub(crate) fn log_path(max: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max];
    }
    let step = ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| max * (step * i as f64).exp()).collect()
}
