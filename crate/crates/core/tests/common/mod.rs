//! Independent oracles and reference tables shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simdoe::anova::{fit_anova, AnovaTable};
use simdoe::design::full_factorial;
use simdoe::{Factor, Observation, ResponseTable, Term};

/// Published ANOVA of all 432 type-I error runs.
pub const KMM_FULL: &str = "\
method                3  555.1
tail                  2  332.3
n                     2   11.4
p0                    3    2.7
sigma                 2   99.2
method:tail           6 2258.0
method:n              6   50.4
method:p0             9   35.4
method:sigma          6  137.7
tail:n                4   11.6
tail:p0               6   21.7
tail:sigma            4   90.1
n:p0                  6    1.0
n:sigma               4   11.9
p0:sigma              6   80.7
method:tail:n        12   48.3
method:tail:p0       18   60.1
method:tail:sigma    12  298.1
method:n:p0          18    5.0
method:n:sigma       12   13.4
method:p0:sigma      18  103.3
tail:n:p0            12    0.9
tail:n:sigma          8    5.1
tail:p0:sigma        12   37.3
n:p0:sigma           12   10.8
method:tail:n:p0     36    6.8
method:tail:n:sigma  24   18.4
method:tail:p0:sigma 36  129.9
method:n:p0:sigma    36   22.2
tail:n:p0:sigma      24    6.1
Residuals            72   21.2
";

/// Published ANOVA with method AN removed (324 runs).
pub const KMM_NO_AN: &str = "\
method                2  11.34
tail                  2  52.96
n                     2   0.59
p0                    3   4.07
sigma                 2   8.52
method:tail           4 215.13
method:n              4   0.46
method:p0             6   1.56
method:sigma          4   7.46
tail:n                4   0.54
tail:p0               6  43.31
tail:sigma            4   1.18
n:p0                  6   0.84
n:sigma               4   2.41
p0:sigma              6   9.12
method:tail:n         8   7.58
method:tail:p0       12  16.33
method:tail:sigma     8  35.23
method:n:p0          12   4.57
method:n:sigma        8   2.47
method:p0:sigma      12   3.87
tail:n:p0            12   0.50
tail:n:sigma          8   2.08
tail:p0:sigma        12   0.99
n:p0:sigma           12   1.50
method:tail:n:p0     24   4.54
method:tail:n:sigma  16   7.83
method:tail:p0:sigma 24  21.98
method:n:p0:sigma    24   6.93
tail:n:p0:sigma      24   2.52
Residuals            48   9.33
";

/// Published ANOVA of the 72-run reduced experiment.
pub const KMM_CHEAPO: &str = "\
method                2   3.01
tail                  2  11.94
n                     1   0.01
p0                    1   3.25
sigma                 1   3.69
method:tail           4  51.55
method:n              2   0.56
method:p0             2   0.43
method:sigma          2   1.67
tail:n                2   0.18
tail:p0               2  18.26
tail:sigma            2   0.22
n:p0                  1   0.19
n:sigma               1   1.05
p0:sigma              1   2.46
method:tail:n         4   6.40
method:tail:p0        4   3.32
method:tail:sigma     4  19.22
method:n:p0           2   0.87
method:n:sigma        2   0.44
method:p0:sigma       2   0.17
tail:n:p0             2   0.10
tail:n:sigma          2   0.41
tail:p0:sigma         2   0.10
n:p0:sigma            1   0.59
method:tail:n:p0      4   3.20
method:tail:n:sigma   4   3.10
method:tail:p0:sigma  4   9.85
method:n:p0:sigma     2   0.68
tail:n:p0:sigma       2   0.14
Residuals             4   0.40
";

pub struct RefRow {
    pub label: String,
    pub df: usize,
    pub ss: f64,
}

pub fn parse_reference(text: &str) -> Vec<RefRow> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            RefRow { label: f[0].to_string(), df: f[1].parse().unwrap(), ss: f[2].parse().unwrap() }
        })
        .collect()
}

/// Compares every reference row (df exact, SS within `tol`). Returns one
/// message per mismatch.
pub fn compare_to_reference(a: &AnovaTable, reference: &str, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let refs = parse_reference(reference);
    if a.rows.len() + 1 != refs.len() {
        bad.push(format!("{} rows computed, {} published", a.rows.len() + 1, refs.len()));
    }
    for r in refs {
        let (df, ss) = if r.label == "Residuals" {
            (a.residual.df, a.residual.ss)
        } else {
            match a.row(&r.label) {
                Some(row) => (row.df, row.ss),
                None => {
                    bad.push(format!("{} missing", r.label));
                    continue;
                }
            }
        };
        if df != r.df {
            bad.push(format!("{}: df {} vs {}", r.label, df, r.df));
        }
        if (ss - r.ss).abs() > tol {
            bad.push(format!("{}: SS {:.4} vs {}", r.label, ss, r.ss));
        }
    }
    bad
}

/// Helmert contrasts for a factor with `k` levels: `k × (k−1)`, columns
/// orthogonal to the constant.
fn helmert(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        if i <= j {
            -1.0
        } else if i == j + 1 {
            (j + 1) as f64
        } else {
            0.0
        }
    })
}

/// Model-matrix block for `term`: products of the factors' contrast columns.
fn term_block(table: &ResponseTable, term: &Term) -> DMatrix<f64> {
    let n = table.len();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for &f in term.factors() {
        let h = helmert(table.factors()[f].n_levels());
        let mut next = Vec::new();
        for c in &cols {
            for j in 0..h.ncols() {
                next.push((0..n).map(|r| c[r] * h[(table.levels(r)[f], j)]).collect());
            }
        }
        cols = next;
    }
    DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
}

/// Residual sum of squares after projecting `y` onto the column space of a
/// full-column-rank `x` (Householder QR).
fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let q = x.clone().qr().q();
    (y - &q * (q.transpose() * y)).norm_squared()
}

pub struct OracleRow {
    pub term: Term,
    pub df: usize,
    pub ss: f64,
}

pub struct OracleAnova {
    pub rows: Vec<OracleRow>,
    pub resid_df: usize,
    pub resid_ss: f64,
}

/// Sequential least squares: each term's SS is the drop in residual SS when
/// its contrast block joins the model, terms entered by order.
pub fn anova_oracle(table: &ResponseTable, max_order: usize) -> OracleAnova {
    let n = table.len();
    let y = DVector::from_vec(table.responses());
    let mut x = DMatrix::from_element(n, 1, 1.0);
    let mut prev = rss(&x, &y);
    let mut rows = Vec::new();
    for term in Term::all_up_to(table.factors().len(), max_order) {
        let block = term_block(table, &term);
        let mut wider = DMatrix::zeros(n, x.ncols() + block.ncols());
        wider.columns_mut(0, x.ncols()).copy_from(&x);
        wider.columns_mut(x.ncols(), block.ncols()).copy_from(&block);
        let rank_before = x.clone().svd(false, false).rank(1e-9);
        let rank_after = wider.clone().svd(false, false).rank(1e-9);
        let now = rss(&wider, &y);
        rows.push(OracleRow { term, df: rank_after - rank_before, ss: prev - now });
        prev = now;
        x = wider;
    }
    let rank = x.clone().svd(false, false).rank(1e-9);
    OracleAnova { rows, resid_df: n - rank, resid_ss: prev }
}

/// Double-exponential quadrature on `[a, b]`, split into equal pieces so
/// sharply peaked integrands are resolved.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    const PIECES: usize = 16;
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|k| quadrature::integrate(&f, a + k as f64 * h, a + (k + 1) as f64 * h, eps / PIECES as f64).integral)
        .sum()
}

/// Unnormalized beta integral `∫_lo^hi t^(a−1)(1−t)^(b−1) dt`, with
/// substitutions `t = s²` on `[0, ½]` and `1 − t = r²` on `[½, 1]` removing
/// the endpoint singularities of half-integer shapes.
fn beta_integral(a: f64, b: f64, lo: f64, hi: f64, eps: f64) -> f64 {
    let mut total = 0.0;
    if lo < 0.5 {
        let top = hi.min(0.5);
        total += integrate(|s| 2.0 * s.powf(2.0 * a - 1.0) * (1.0 - s * s).powf(b - 1.0), lo.sqrt(), top.sqrt(), eps);
    }
    if hi > 0.5 {
        let bottom = lo.max(0.5);
        total += integrate(
            |r| 2.0 * r.powf(2.0 * b - 1.0) * (1.0 - r * r).powf(a - 1.0),
            (1.0 - hi).sqrt(),
            (1.0 - bottom).sqrt(),
            eps,
        );
    }
    total
}

/// `P(F > f)` for an F(df1, df2) variable by quadrature of the beta
/// density, normalized by the same quadrature over `[0, 1]`.
pub fn f_tail_oracle(f: f64, df1: f64, df2: f64) -> f64 {
    let (a, b) = (df1 / 2.0, df2 / 2.0);
    let x = df1 * f / (df1 * f + df2);
    // a coarse pass sets the scale for a relative tolerance
    let scale = beta_integral(a, b, 0.0, 1.0, 1e-3 * (a.min(b) * -10.0).exp());
    let whole = beta_integral(a, b, 0.0, 1.0, 1e-13 * scale);
    beta_integral(a, b, x, 1.0, 1e-13 * scale) / whole
}

/// All `2^k` coded runs satisfying every generator mask (product = +1).
pub fn brute_fraction(k: usize, generators: &[u32]) -> Vec<Vec<i8>> {
    (0..1u32 << k)
        .map(|bits| (0..k).map(|j| if bits >> j & 1 == 1 { 1 } else { -1 }).collect::<Vec<i8>>())
        .filter(|run| generators.iter().all(|&g| column_value(run, g) == 1))
        .collect()
}

pub fn column_value(run: &[i8], mask: u32) -> i8 {
    (0..run.len()).filter(|j| mask >> j & 1 == 1).map(|j| run[j]).product()
}

pub fn column(runs: &[Vec<i8>], mask: u32) -> Vec<i8> {
    runs.iter().map(|r| column_value(r, mask)).collect()
}

/// Non-identity masks whose column is constant over `runs`.
pub fn brute_relation(runs: &[Vec<i8>], k: usize) -> Vec<u32> {
    (1..1u32 << k)
        .filter(|&m| {
            let c = column(runs, m);
            c.iter().all(|v| *v == c[0])
        })
        .collect()
}

/// Two masks share a contrast column up to sign.
pub fn brute_aliased(runs: &[Vec<i8>], a: u32, b: u32) -> bool {
    let (ca, cb) = (column(runs, a), column(runs, b));
    ca == cb || ca.iter().zip(&cb).all(|(x, y)| *x == -*y)
}

/// A balanced full factorial with `levels[j]` levels per factor,
/// `reps` replicates and the given responses in (run, replicate) order.
pub fn balanced(levels: &[usize], reps: u32, y: &[f64]) -> ResponseTable {
    let factors = levels
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let labels: Vec<String> = (0..k).map(|l| format!("l{l}")).collect();
            Factor::categorical(format!("f{j}"), &labels).unwrap()
        })
        .collect();
    let design = full_factorial(factors).unwrap();
    let rows = (0..design.n_runs())
        .flat_map(|run| (1..=reps).map(move |replicate| (run, replicate)))
        .zip(y)
        .map(|((run, replicate), &response)| Observation { run, replicate, response })
        .collect();
    ResponseTable::new(design, rows).unwrap()
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-12 * scale
}

/// Compares the library table against the least-squares oracle; returns
/// a description of the first mismatch.
pub fn check_against_oracle(table: &ResponseTable, max_order: usize) -> Result<(), String> {
    let lib = fit_anova(table, max_order).map_err(|e| e.to_string())?;
    let ora = anova_oracle(table, max_order);
    let scale = lib.total_ss.max(1e-300);
    if lib.rows.len() != ora.rows.len() {
        return Err(format!("{} rows vs {}", lib.rows.len(), ora.rows.len()));
    }
    if lib.residual.df != ora.resid_df || !close(lib.residual.ss, ora.resid_ss, scale) {
        return Err(format!(
            "residual ({}, {}) vs ({}, {})",
            lib.residual.df, lib.residual.ss, ora.resid_df, ora.resid_ss
        ));
    }
    for (l, o) in lib.rows.iter().zip(&ora.rows) {
        if l.term != o.term || l.df != o.df || !close(l.ss, o.ss, scale) {
            return Err(format!("{}: ({}, {}) vs ({}, {})", l.label, l.df, l.ss, o.df, o.ss));
        }
        if ora.resid_df > 0 && ora.resid_ss > 1e-12 * scale {
            let f = (o.ss / o.df as f64) / (ora.resid_ss / ora.resid_df as f64);
            let lf = l.f.ok_or_else(|| format!("{}: missing F", l.label))?;
            if !close(lf, f, f.abs()) {
                return Err(format!("{}: F {} vs {}", l.label, lf, f));
            }
        }
    }
    Ok(())
}

/// 50 random balanced designs with up to 4 factors, 3 levels and 3
/// replicates, fitted at a random maximum order.
pub fn random_designs(seed: u64) -> Vec<(ResponseTable, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..50)
        .map(|_| {
            let k = rng.random_range(1..=4);
            let levels: Vec<usize> = (0..k).map(|_| rng.random_range(2..=3)).collect();
            let reps = rng.random_range(1..=3);
            let n = levels.iter().product::<usize>() * reps as usize;
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let order = rng.random_range(1..=k);
            (balanced(&levels, reps, &y), order)
        })
        .collect()
}

/// Grid of (df1, df2, f) spanning half-integer shapes, heavy tails and the
/// extreme p-values of the published tables.
pub fn f_grid() -> Vec<(f64, f64, f64)> {
    let mut g = vec![(2.0, 72.0, 19.353)];
    for &d1 in &[1.0, 2.0, 3.0, 5.0, 12.0, 36.0] {
        for &d2 in &[1.0, 2.0, 5.0, 17.0, 48.0, 72.0] {
            for &f in &[0.05, 0.5, 1.0, 2.5, 7.0, 30.0] {
                g.push((d1, d2, f));
            }
        }
    }
    g
}
