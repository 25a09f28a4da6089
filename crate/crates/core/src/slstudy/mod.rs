//! Statistical-learning simulation: correlated Gaussian predictors expanded
//! with all pairwise products, a heredity-sparse linear truth, two learners
//! and a logit-R² response measured on an independent test set.

mod lasso;
mod ridge;
mod sim;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heredity::{pair_index, ActivityPattern};

pub use lasso::{lambda_grid, lasso_path, Lasso};
pub use ridge::{ridge_fit, Ridge};
pub use sim::{SlSimulation, SL_FACTORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub q: usize,
    pub n: usize,
    pub ene: f64,
    pub beta_mu: f64,
    pub sigma: f64,
    pub x_cor: f64,
}

impl PopulationSpec {
    /// Number of expanded predictors, `q(q+1)/2`.
    pub fn p(&self) -> usize {
        self.q * (self.q + 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.q < 2 {
            return Err(Error::Invalid(format!("need n >= 1 and q >= 2, got n = {}, q = {}", self.n, self.q)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma = {} must be positive", self.sigma)));
        }
        if !self.beta_mu.is_finite() {
            return Err(Error::Invalid("beta_mu must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.x_cor) {
            return Err(Error::InvalidCorrelation(self.x_cor));
        }
        Ok(())
    }
}

/// AR(1) correlation matrix with entries `x_cor^|i−j|`; `0^0 = 1`.
pub fn covariance_matrix(q: usize, x_cor: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&x_cor) {
        return Err(Error::InvalidCorrelation(x_cor));
    }
    Ok(DMatrix::from_fn(q, q, |i, j| x_cor.powi(i.abs_diff(j) as i32)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub pattern: ActivityPattern,
    /// Coefficients over the expanded columns.
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// `n × q(q+1)/2`: the q measured variables, then products `x_i·x_j`
    /// for `i < j` in canonical pair order.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub truth: Truth,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Noise-free mean response.
    pub fn signal(&self) -> Vec<f64> {
        (&self.x * DVector::from_column_slice(&self.truth.beta)).as_slice().to_vec()
    }
}

/// Coefficient vector over the expanded columns for an activity pattern.
pub fn coefficients(pattern: &ActivityPattern, beta_mu: f64) -> Vec<f64> {
    let q = pattern.q;
    let mut beta = vec![0.0; q * (q + 1) / 2];
    for &i in &pattern.active_mains {
        beta[i] = beta_mu;
    }
    for &(i, j) in &pattern.active_interactions {
        beta[q + pair_index(q, i, j)] = beta_mu;
    }
    beta
}

pub fn generate_dataset(spec: &PopulationSpec, pattern: &ActivityPattern, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if pattern.q != spec.q {
        return Err(Error::Invalid(format!("pattern has q = {}, population has q = {}", pattern.q, spec.q)));
    }
    let (n, q) = (spec.n, spec.q);
    let sigma_mat = covariance_matrix(q, spec.x_cor)?;
    let chol =
        sigma_mat.cholesky().ok_or_else(|| Error::CholeskyFailure(format!("q = {q}, x_cor = {}", spec.x_cor)))?;
    let l = chol.l();
    let beta = coefficients(pattern, spec.beta_mu);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<f64>::zeros(n, spec.p());
    let mut y = Vec::with_capacity(n);
    let mut z = DVector::<f64>::zeros(q);
    for r in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let m = &l * &z;
        let mut k = q;
        for i in 0..q {
            x[(r, i)] = m[i];
            for j in i + 1..q {
                x[(r, k)] = m[i] * m[j];
                k += 1;
            }
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let mean: f64 = beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(c, b)| b * x[(r, c)]).sum();
        y.push(mean + spec.sigma * eps);
    }
    Ok(Dataset { x, y, truth: Truth { pattern: pattern.clone(), beta } })
}

/// A fitted model.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64>;
}

/// A learning procedure. Implementations must be deterministic given `seed`.
pub trait Learner: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>>;
}

/// Intercept plus linear coefficients on the raw (uncentered) columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Penalty the fit was computed at.
    pub penalty: f64,
    /// Columns left out for having zero variance in the training data.
    pub excluded: Vec<usize>,
}

impl LinearFit {
    pub fn n_nonzero(&self) -> usize {
        self.coef.iter().filter(|b| **b != 0.0).count()
    }
}

impl Predictor for LinearFit {
    fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.coef.len(), "column count mismatch");
        let mut out = vec![self.intercept; x.nrows()];
        for (j, &b) in self.coef.iter().enumerate() {
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                    *o += b * v;
                }
            }
        }
        out
    }
}

/// Column-centered copy of selected rows, with per-column mean squares.
pub(crate) struct Centered {
    pub n: usize,
    pub p: usize,
    /// Column-major, `n × p`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
    /// `‖x_j‖² / n` after centering.
    pub d: Vec<f64>,
    pub usable: Vec<bool>,
}

const ZERO_VARIANCE: f64 = 1e-12;

impl Centered {
    pub fn new(x: &DMatrix<f64>, y: &[f64], rows: &[usize]) -> Centered {
        let (n, p) = (rows.len(), x.ncols());
        let nf = n as f64;
        let y_mean = rows.iter().map(|&r| y[r]).sum::<f64>() / nf;
        let yc = rows.iter().map(|&r| y[r] - y_mean).collect();
        let mut xc = Vec::with_capacity(n * p);
        let mut x_mean = Vec::with_capacity(p);
        let mut d = Vec::with_capacity(p);
        let mut usable = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let m = rows.iter().map(|&r| col[r]).sum::<f64>() / nf;
            let start = xc.len();
            xc.extend(rows.iter().map(|&r| col[r] - m));
            let ss = xc[start..].iter().map(|v| v * v).sum::<f64>() / nf;
            x_mean.push(m);
            d.push(ss);
            usable.push(ss > ZERO_VARIANCE);
        }
        Centered { n, p, x: xc, y: yc, x_mean, y_mean, d, usable }
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn excluded(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| !self.usable[j]).collect()
    }

    /// Map centered-scale coefficients back to an intercept on raw columns.
    pub fn to_fit(&self, coef: Vec<f64>, penalty: f64) -> LinearFit {
        let intercept = self.y_mean - coef.iter().zip(&self.x_mean).map(|(b, m)| b * m).sum::<f64>();
        LinearFit { intercept, coef, penalty, excluded: self.excluded() }
    }
}

/// Deterministic fold labels: a seeded shuffle of `0..n`, dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

pub(crate) fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || n < folds {
        return Err(Error::DegenerateDesign(format!(
            "cross-validation needs n >= folds >= 2, got n = {n}, folds = {folds}"
        )));
    }
    Ok(())
}

/// Training and held-out row indices for each fold.
pub(crate) fn fold_rows(labels: &[usize], folds: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..folds)
        .map(|k| {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == k);
            (train, held)
        })
        .collect()
}

pub const R2_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub r2: f64,
    pub logit_r2: f64,
    /// R² fell in a clamp region or predictions were constant.
    pub degenerate: bool,
}

/// Squared Pearson correlation between `y` and `yhat`; 0 when either is
/// constant.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = yhat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        syy += da * da;
        sxx += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    }
}

/// `log(R² / (1 − R²))` with R² clamped to `[1e-8, 1 − 1e-8]`.
pub fn logit_r2(r2: f64) -> f64 {
    let r = r2.clamp(R2_CLAMP, 1.0 - R2_CLAMP);
    (r / (1.0 - r)).ln()
}

pub fn evaluate(predictor: &dyn Predictor, test: &Dataset) -> Result<Evaluation> {
    if test.n() == 0 {
        return Err(Error::Invalid("empty test set".into()));
    }
    let yhat = predictor.predict(&test.x);
    let r2 = r_squared(&test.y, &yhat);
    Ok(Evaluation { r2, logit_r2: logit_r2(r2), degenerate: !(R2_CLAMP..=1.0 - R2_CLAMP).contains(&r2) })
}
