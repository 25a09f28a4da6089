//! Balanced fixed-effects ANOVA by hierarchical marginal-mean decomposition.
//!
//! Each term's estimate in a cell is the term's marginal mean minus every
//! lower-order fitted contribution; its sum of squares is the replicate
//! weighted sum of squared estimates. Only balanced-complete factorial
//! layouts are accepted, where this matches least squares exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Factor, ResponseTable, Term};
use crate::special::f_upper_tail;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub term: Term,
    pub label: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    /// `None` when there is no residual to test against.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub df: usize,
    pub ss: f64,
    pub ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub residual: Residual,
    pub total_df: usize,
    pub total_ss: f64,
}

impl AnovaTable {
    pub fn row(&self, label: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Rows sorted by decreasing sum of squares (ties by label).
    pub fn by_ss(&self) -> Vec<&AnovaRow> {
        let mut v: Vec<&AnovaRow> = self.rows.iter().collect();
        v.sort_by(|a, b| b.ss.total_cmp(&a.ss).then_with(|| a.label.cmp(&b.label)));
        v
    }

    /// Layout modelled on R's `summary(aov(...))`.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Residuals".len());
        let mut out = String::new();
        writeln!(out, "{:width$} {:>4} {:>9} {:>9} {:>9} {:>9}", "", "Df", "Sum Sq", "Mean Sq", "F value", "Pr(>F)")
            .unwrap();
        let mut last_order = 0;
        for r in &self.rows {
            if last_order != 0 && r.term.order() != last_order {
                out.push('\n');
            }
            last_order = r.term.order();
            let (f, p, stars) = match (r.f, r.p) {
                (Some(f), Some(p)) => (format!("{f:.3}"), format_p(p), stars(p)),
                _ => (String::new(), String::new(), ""),
            };
            writeln!(out, "{:width$} {:>4} {:>9.2} {:>9.3} {:>9} {:>9} {}", r.label, r.df, r.ss, r.ms, f, p, stars)
                .unwrap();
        }
        out.push('\n');
        match self.residual.ms {
            Some(ms) => {
                writeln!(out, "{:width$} {:>4} {:>9.2} {:>9.3}", "Residuals", self.residual.df, self.residual.ss, ms)
                    .unwrap()
            }
            None => writeln!(
                out,
                "{:width$} {:>4} {:>9.2}   (no residual degrees of freedom)",
                "Residuals", self.residual.df, self.residual.ss
            )
            .unwrap(),
        }
        writeln!(out, "---").unwrap();
        writeln!(out, "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1").unwrap();
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "df", "sum_sq", "mean_sq", "f_value", "p_value"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.df.to_string(),
                format!("{}", r.ss),
                format!("{}", r.ms),
                opt(r.f),
                opt(r.p),
            ])?;
        }
        w.write_record([
            "Residuals".to_string(),
            self.residual.df.to_string(),
            format!("{}", self.residual.ss),
            opt(self.residual.ms),
            String::new(),
            String::new(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// p-values below 1e-16 print as `< 1e-16`.
pub fn format_p(p: f64) -> String {
    if p < 1e-16 {
        "< 1e-16".into()
    } else if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.6}")
    }
}

pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => ".",
        _ => "",
    }
}

/// Per-cell means over the complete cross of factor levels.
struct CellGrid {
    sizes: Vec<usize>,
    means: Vec<f64>,
}

impl CellGrid {
    fn build(table: &ResponseTable) -> Result<CellGrid> {
        table.check_balanced()?;
        let design = table.design();
        let sizes: Vec<usize> = design.factors().iter().map(Factor::n_levels).collect();
        if !design.is_full_factorial() {
            return Err(Error::Unbalanced { missing: missing_cells(table), duplicated: Vec::new() });
        }
        let n_cells = design.full_size();
        let mut sums = vec![0.0; n_cells];
        let mut counts = vec![0usize; n_cells];
        for r in table.rows() {
            let c = flat_index(design.run(r.run), &sizes);
            sums[c] += r.response;
            counts[c] += 1;
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        Ok(CellGrid { sizes, means })
    }
}

fn missing_cells(table: &ResponseTable) -> Vec<String> {
    let design = table.design();
    let full = crate::design::full_factorial(design.factors().to_vec()).expect("factors already validated");
    let present: std::collections::HashSet<&[usize]> = design.runs().iter().map(Vec::as_slice).collect();
    full.runs()
        .iter()
        .filter(|r| !present.contains(r.as_slice()))
        .map(|r| crate::model::describe_run(design.factors(), r))
        .collect()
}

fn flat_index(levels: &[usize], sizes: &[usize]) -> usize {
    levels.iter().zip(sizes).fold(0, |acc, (&l, &s)| acc * s + l)
}

fn unflatten(mut index: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for j in (0..sizes.len()).rev() {
        out[j] = index % sizes[j];
        index /= sizes[j];
    }
    out
}

/// Fit every term of order `1..=max_order`.
pub fn fit_anova(table: &ResponseTable, max_order: usize) -> Result<AnovaTable> {
    let k = table.factors().len();
    if max_order == 0 || max_order > k {
        return Err(Error::InvalidOrder(max_order));
    }
    if k > 63 {
        return Err(Error::Invalid("too many factors".into()));
    }
    let grid = CellGrid::build(table)?;
    let n = table.len();
    let grand = table.grand_mean();
    let total_ss: f64 = table.rows().iter().map(|r| (r.response - grand).powi(2)).sum();
    let cell_levels: Vec<Vec<usize>> = (0..grid.means.len()).map(|c| unflatten(c, &grid.sizes)).collect();

    // effects keyed by factor bitmask; the empty set holds the grand mean
    let mut effects: HashMap<u64, Vec<f64>> = HashMap::new();
    effects.insert(0, vec![grand]);
    let terms = Term::all_up_to(k, max_order);
    let mut rows = Vec::with_capacity(terms.len());
    for term in &terms {
        let fs = term.factors();
        let sub_sizes: Vec<usize> = fs.iter().map(|&j| grid.sizes[j]).collect();
        let n_sub: usize = sub_sizes.iter().product();
        let mut marginal = vec![0.0; n_sub];
        for (c, lv) in cell_levels.iter().enumerate() {
            let key: Vec<usize> = fs.iter().map(|&j| lv[j]).collect();
            marginal[flat_index(&key, &sub_sizes)] += grid.means[c];
        }
        let per_cell = (grid.means.len() / n_sub) as f64;
        for m in &mut marginal {
            *m /= per_cell;
        }
        // subtract each proper subset's contribution
        let mut est = marginal;
        for s in 0..n_sub {
            let lv = unflatten(s, &sub_sizes);
            for sub in 0..(1u64 << fs.len()) - 1 {
                let (mut mask, mut key, mut sizes) = (0u64, Vec::new(), Vec::new());
                for (pos, &j) in fs.iter().enumerate() {
                    if sub & (1 << pos) != 0 {
                        mask |= 1 << j;
                        key.push(lv[pos]);
                        sizes.push(sub_sizes[pos]);
                    }
                }
                est[s] -= effects[&mask][flat_index(&key, &sizes)];
            }
        }
        let weight = n as f64 / n_sub as f64;
        let ss = weight * est.iter().map(|e| e * e).sum::<f64>();
        let df: usize = sub_sizes.iter().map(|s| s - 1).product();
        let mask = fs.iter().fold(0u64, |m, &j| m | (1 << j));
        effects.insert(mask, est);
        rows.push(AnovaRow {
            term: term.clone(),
            label: term.label(table.factors()),
            df,
            ss,
            ms: if df > 0 { ss / df as f64 } else { 0.0 },
            f: None,
            p: None,
        });
    }

    let total_df = n - 1;
    let term_df: usize = rows.iter().map(|r| r.df).sum();
    let res_df = total_df
        .checked_sub(term_df)
        .ok_or_else(|| Error::Invalid("model has more degrees of freedom than observations".into()))?;
    let term_ss: f64 = rows.iter().map(|r| r.ss).sum();
    let mut res_ss = total_ss - term_ss;
    if res_ss < 0.0 && res_ss.abs() <= 1e-9 * total_ss.max(1.0) {
        res_ss = 0.0;
    }
    let res_ms = (res_df > 0).then(|| res_ss / res_df as f64);
    if let Some(ms_e) = res_ms {
        for r in &mut rows {
            if r.df == 0 {
                continue;
            }
            let f = if ms_e > 0.0 {
                Some(r.ms / ms_e)
            } else if r.ms > 0.0 {
                Some(f64::INFINITY)
            } else {
                None
            };
            r.f = f;
            r.p = match f {
                Some(f) => Some(f_upper_tail(f, r.df as f64, res_df as f64)?),
                None => None,
            };
        }
    }
    Ok(AnovaTable { rows, residual: Residual { df: res_df, ss: res_ss, ms: res_ms }, total_df, total_ss })
}
