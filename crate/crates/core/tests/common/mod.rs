//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use fdrstab::numerics::{DenseMatrix, RngStream};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(T_df > t)` by integrating the unnormalized density on `x = tan θ` and
/// dividing by the integral over the whole line.
pub fn t_sf_by_quadrature(t: f64, df: f64) -> f64 {
    let h = |theta: f64| {
        let x = theta.tan();
        let c = theta.cos();
        (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let half = std::f64::consts::FRAC_PI_2;
    // The integrand vanishes at ±π/2 for df > 1; stay a hair inside for df = 1.
    let edge = half - 1e-15;
    let total = simpson(&h, -edge, edge, 1e-14);
    simpson(&h, t.atan(), edge, 1e-14) / total
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

/// Columns `1..=p` of a Sylvester Hadamard matrix: ±1 entries, zero mean, `XᵀX = n·I`.
pub fn hadamard_design(n: usize, p: usize) -> DenseMatrix {
    assert!(n.is_power_of_two() && p < n);
    let mut v = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            v.push(if (i & (j + 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    DenseMatrix::from_vec(n, p, v).unwrap()
}

pub fn gaussian_matrix(n: usize, p: usize, rng: &mut RngStream) -> DenseMatrix {
    let mut v = vec![0.0; n * p];
    rng.fill_normal(&mut v);
    DenseMatrix::from_vec(n, p, v).unwrap()
}

/// OLS with intercept through the normal equations, solved by Gaussian elimination with partial pivoting.
pub fn ols_by_elimination(x: &DenseMatrix, y: &[f64]) -> (Vec<f64>, f64) {
    let (n, p) = (x.rows(), x.cols());
    let k = p + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..n {
        let row: Vec<f64> = std::iter::once(1.0).chain(x.row(i).iter().copied()).collect();
        for r in 0..k {
            for c in 0..k {
                a[r][c] += row[r] * row[c];
            }
            a[r][k] += row[r] * y[i];
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let sol: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    (sol[1..].to_vec(), sol[0])
}
