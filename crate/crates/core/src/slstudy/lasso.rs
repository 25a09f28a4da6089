//! Lasso by cyclic coordinate descent with warm starts along a penalty path.
//!
//! Objective on centered data: `½‖y − Xβ‖²/n + λ‖β‖₁`.

use nalgebra::DMatrix;

use super::{check_folds, fold_assignment, fold_rows, Centered, Learner, LinearFit, Predictor};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Lasso {
    pub folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Convergence threshold on `max_j d_j Δβ_j²` relative to `var(y)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for Lasso {
    fn default() -> Self {
        Lasso { folds: 10, n_lambda: 100, lambda_min_ratio: 1e-3, tol: 1e-7, max_sweeps: 100_000 }
    }
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `λ_max = max_j |x_jᵀy|/n` on centered data, where every coefficient is
/// zero.
pub(crate) fn lambda_max(c: &Centered) -> f64 {
    (0..c.p).filter(|&j| c.usable[j]).map(|j| dot(c.col(j), &c.y).abs() / c.n as f64).fold(0.0, f64::max)
}

/// Log-spaced grid from `λ_max` down to `ratio·λ_max`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (n - 1) as f64;
    (0..n).map(|k| lambda_max * (step * k as f64).exp()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve at `lambda` starting from `beta`, with `resid = y − Xβ` kept in sync.
fn solve(c: &Centered, lambda: f64, beta: &mut [f64], resid: &mut [f64], tol: f64, max_sweeps: usize) {
    let nf = c.n as f64;
    let thresh = tol * (dot(&c.y, &c.y) / nf).max(f64::MIN_POSITIVE);
    let update = |j: usize, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let xj = c.col(j);
        let g = dot(xj, resid) / nf;
        let old = beta[j];
        let new = soft(g + c.d[j] * old, lambda) / c.d[j];
        if new != old {
            let delta = new - old;
            for (r, x) in resid.iter_mut().zip(xj) {
                *r -= delta * x;
            }
            beta[j] = new;
            c.d[j] * delta * delta
        } else {
            0.0
        }
    };
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        // full pass to discover the active set
        let mut worst = 0.0f64;
        for j in (0..c.p).filter(|&j| c.usable[j]) {
            worst = worst.max(update(j, beta, resid));
        }
        sweeps += 1;
        if worst < thresh {
            break;
        }
        let active: Vec<usize> = (0..c.p).filter(|&j| beta[j] != 0.0).collect();
        while sweeps < max_sweeps {
            let mut worst = 0.0f64;
            for &j in &active {
                worst = worst.max(update(j, beta, resid));
            }
            sweeps += 1;
            if worst < thresh {
                break;
            }
        }
    }
}

fn path(c: &Centered, lambdas: &[f64], tol: f64, max_sweeps: usize) -> Vec<Vec<f64>> {
    let mut beta = vec![0.0; c.p];
    let mut resid = c.y.clone();
    lambdas
        .iter()
        .map(|&l| {
            solve(c, l, &mut beta, &mut resid, tol, max_sweeps);
            beta.clone()
        })
        .collect()
}

/// Fits along `lambdas` (in the given order, warm-started) on all rows.
pub fn lasso_path(x: &DMatrix<f64>, y: &[f64], lambdas: &[f64], tol: f64) -> Vec<LinearFit> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let c = Centered::new(x, y, &rows);
    path(&c, lambdas, tol, Lasso::default().max_sweeps).into_iter().zip(lambdas).map(|(b, &l)| c.to_fit(b, l)).collect()
}

impl Lasso {
    /// Cross-validated fit; also returns the penalty grid and mean CV error
    /// at each grid point.
    pub fn fit_cv(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<(LinearFit, Vec<f64>, Vec<f64>)> {
        let n = x.nrows();
        check_folds(n, self.folds)?;
        let all: Vec<usize> = (0..n).collect();
        let full = Centered::new(x, y, &all);
        let lmax = lambda_max(&full);
        if lmax == 0.0 {
            let fit = full.to_fit(vec![0.0; full.p], 0.0);
            return Ok((fit, vec![0.0], vec![0.0]));
        }
        let grid = lambda_grid(lmax, self.n_lambda, self.lambda_min_ratio);

        let labels = fold_assignment(n, self.folds, seed);
        let mut sse = vec![0.0; grid.len()];
        for (train, held) in fold_rows(&labels, self.folds) {
            let c = Centered::new(x, y, &train);
            for (k, beta) in path(&c, &grid, self.tol, self.max_sweeps).into_iter().enumerate() {
                let fit = c.to_fit(beta, grid[k]);
                for &i in &held {
                    let pred = fit.intercept
                        + fit
                            .coef
                            .iter()
                            .enumerate()
                            .filter(|(_, b)| **b != 0.0)
                            .map(|(j, b)| b * x[(i, j)])
                            .sum::<f64>();
                    sse[k] += (y[i] - pred).powi(2);
                }
            }
        }
        let cv: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
        // first minimum: ties resolve toward the larger penalty
        let best = cv.iter().enumerate().fold(0, |b, (k, v)| if *v < cv[b] { k } else { b });
        let beta = path(&full, &grid[..=best], self.tol, self.max_sweeps).pop().expect("nonempty grid");
        Ok((full.to_fit(beta, grid[best]), grid, cv))
    }
}

impl Learner for Lasso {
    fn name(&self) -> &str {
        "lasso"
    }

    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_cv(x, y, seed)?.0))
    }
}
