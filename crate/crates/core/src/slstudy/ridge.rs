//! Ridge regression through the SVD of the centered design.
//!
//! Objective: `½‖y − Xβ‖²/n + ½α‖β‖²`, so `β = V diag(s/(s² + nα)) Uᵀy`.

use nalgebra::{DMatrix, DVector};

use super::{check_folds, fold_assignment, fold_rows, Centered, Learner, LinearFit, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Ridge {
    pub folds: usize,
    pub n_alpha: usize,
    /// Grid spans `[lo, hi] · s_max²/n`.
    pub span: (f64, f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge { folds: 10, n_alpha: 60, span: (1e-4, 1e4) }
    }
}

struct Decomposition {
    u_t_y: DVector<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

fn decompose(c: &Centered) -> Result<Decomposition> {
    let cols: Vec<usize> = (0..c.p).filter(|&j| c.usable[j]).collect();
    let mut xm = DMatrix::<f64>::zeros(c.n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        xm.column_mut(k).copy_from_slice(c.col(j));
    }
    let svd = xm.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateDesign("SVD did not converge".into())),
    };
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-12 * smax).collect();
    let y = DVector::from_column_slice(&c.y);
    let u_t_y = DVector::from_iterator(keep.len(), keep.iter().map(|&i| u.column(i).dot(&y)));
    let s = DVector::from_iterator(keep.len(), keep.iter().map(|&i| svd.singular_values[i]));
    // rows of v are the full coefficient space; excluded columns stay zero
    let mut v = DMatrix::<f64>::zeros(c.p, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        for (r, &j) in cols.iter().enumerate() {
            v[(j, k)] = v_t[(i, r)];
        }
    }
    Ok(Decomposition { u_t_y, s, v })
}

fn coef(dec: &Decomposition, n: usize, alpha: f64) -> Vec<f64> {
    let w = DVector::from_iterator(
        dec.s.len(),
        dec.s.iter().zip(dec.u_t_y.iter()).map(|(s, uy)| s / (s * s + n as f64 * alpha) * uy),
    );
    (&dec.v * w).as_slice().to_vec()
}

/// Ridge fit at a fixed penalty; `alpha = 0` gives minimum-norm least
/// squares.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<LinearFit> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let c = Centered::new(x, y, &rows);
    if c.usable.iter().all(|u| !u) {
        return Ok(c.to_fit(vec![0.0; c.p], alpha));
    }
    let dec = decompose(&c)?;
    Ok(c.to_fit(coef(&dec, c.n, alpha), alpha))
}

impl Ridge {
    pub fn fit_cv(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<(LinearFit, Vec<f64>, Vec<f64>)> {
        let n = x.nrows();
        check_folds(n, self.folds)?;
        let all: Vec<usize> = (0..n).collect();
        let full = Centered::new(x, y, &all);
        if full.usable.iter().all(|u| !u) {
            return Ok((full.to_fit(vec![0.0; full.p], f64::INFINITY), vec![], vec![]));
        }
        let dec = decompose(&full)?;
        let scale = dec.s.max().powi(2) / n as f64;
        let (lo, hi) = self.span;
        let steps = self.n_alpha.max(2) - 1;
        let grid: Vec<f64> = (0..=steps).map(|k| scale * hi * (lo / hi).powf(k as f64 / steps as f64)).collect();

        let labels = fold_assignment(n, self.folds, seed);
        let mut sse = vec![0.0; grid.len()];
        for (train, held) in fold_rows(&labels, self.folds) {
            let c = Centered::new(x, y, &train);
            if c.usable.iter().all(|u| !u) {
                for &i in &held {
                    for s in sse.iter_mut() {
                        *s += (y[i] - c.y_mean).powi(2);
                    }
                }
                continue;
            }
            let d = decompose(&c)?;
            // held-out rows centered with training means, projected on V
            let mut xh = DMatrix::<f64>::zeros(held.len(), c.p);
            for (r, &i) in held.iter().enumerate() {
                for j in 0..c.p {
                    xh[(r, j)] = x[(i, j)] - c.x_mean[j];
                }
            }
            let xv = xh * &d.v;
            for (k, &alpha) in grid.iter().enumerate() {
                let w = DVector::from_iterator(
                    d.s.len(),
                    d.s.iter().zip(d.u_t_y.iter()).map(|(s, uy)| s / (s * s + c.n as f64 * alpha) * uy),
                );
                let pred = &xv * w;
                for (r, &i) in held.iter().enumerate() {
                    sse[k] += (y[i] - c.y_mean - pred[r]).powi(2);
                }
            }
        }
        let cv: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
        let best = cv.iter().enumerate().fold(0, |b, (k, v)| if *v < cv[b] { k } else { b });
        let fit = full.to_fit(coef(&dec, n, grid[best]), grid[best]);
        Ok((fit, grid, cv))
    }
}

impl Learner for Ridge {
    fn name(&self) -> &str {
        "ridge"
    }

    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_cv(x, y, seed)?.0))
    }
}
