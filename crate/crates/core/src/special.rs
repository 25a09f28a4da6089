//! Regularized incomplete beta function and the F distribution upper tail.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Regularized incomplete beta function I_x(a, b).
///
/// Evaluated with Lentz's continued fraction, switching to
/// `1 - I_{1-x}(b, a)` when `x > (a+1)/(a+b+2)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Invalid(format!("beta_reg domain: a={a}, b={b}, x={x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_reg_cf(b, a, 1.0 - x))
    } else {
        Ok(beta_reg_cf(a, b, x))
    }
}

fn beta_reg_cf(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    front * h
}

/// `P(F > f)` for an F distribution with `df1` and `df2` degrees of freedom.
pub fn f_upper_tail(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(df1 > 0.0 && df2 > 0.0) || !df1.is_finite() || !df2.is_finite() {
        return Err(Error::InvalidDf { df1, df2 });
    }
    if f.is_nan() || f < 0.0 {
        return Err(Error::Invalid(format!("F statistic must be nonnegative, got {f}")));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    beta_reg(df2 / 2.0, df1 / 2.0, x)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
