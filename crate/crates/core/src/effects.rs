//! Marginal means, two-level effect estimates and half-normal screening.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ResponseTable, Term};
use crate::special::normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanCell {
    /// Level indices of the term's factors, in term order.
    pub levels: Vec<usize>,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalMeans {
    pub term: Term,
    pub cells: Vec<MeanCell>,
}

impl MarginalMeans {
    pub fn get(&self, levels: &[usize]) -> Option<&MeanCell> {
        self.cells.iter().find(|c| c.levels == levels)
    }

    /// Mean of cell means weighted by their counts.
    pub fn weighted_mean(&self) -> f64 {
        let n: usize = self.cells.iter().map(|c| c.count).sum();
        self.cells.iter().map(|c| c.mean * c.count as f64).sum::<f64>() / n as f64
    }
}

/// Mean response for each level combination of `term`'s factors, averaging
/// over everything else.
type AliasGroup = (Term, Vec<i8>, Vec<(Term, i8)>);

pub fn marginal_means(table: &ResponseTable, term: &Term) -> Result<MarginalMeans> {
    table.check_balanced()?;
    if let Some(&j) = term.factors().iter().find(|&&j| j >= table.factors().len()) {
        return Err(Error::UnknownFactor(format!("#{j}")));
    }
    let cells = table
        .group_by(term.factors())
        .into_iter()
        .map(|(levels, rows)| {
            let sum: f64 = rows.iter().map(|&i| table.rows()[i].response).sum();
            MeanCell { levels, mean: sum / rows.len() as f64, count: rows.len() }
        })
        .collect();
    Ok(MarginalMeans { term: term.clone(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub term: Term,
    pub label: String,
    /// Mean response where the term's coded product is +1 minus the mean
    /// where it is -1.
    pub value: f64,
    /// Other terms up to the order cap sharing this contrast, with the sign
    /// relating their column to the representative's.
    pub aliases: Vec<(Term, i8)>,
}

/// Contrast column of `term` over the design's runs.
fn contrast(table: &ResponseTable, term: &Term) -> Vec<i8> {
    table
        .design()
        .runs()
        .iter()
        .map(|run| term.factors().iter().fold(1i8, |s, &j| if run[j] == 0 { -s } else { s }))
        .collect()
}

/// One estimate per estimable contrast among terms up to `max_order`.
///
/// Terms whose columns coincide (up to sign) share an estimate labelled by
/// the lowest-order alias, ties broken lexicographically. Terms with a
/// constant column are confounded with the mean and omitted.
pub fn effect_estimates(table: &ResponseTable, max_order: usize) -> Result<Vec<EffectEstimate>> {
    if let Some(f) = table.factors().iter().find(|f| f.n_levels() != 2) {
        return Err(Error::NonTwoLevelFactor(f.name().to_string()));
    }
    if max_order == 0 {
        return Err(Error::InvalidOrder(0));
    }
    table.check_balanced()?;
    let terms = Term::all_up_to(table.factors().len(), max_order);

    // (representative, contrast column, signed aliases)
    let mut groups: Vec<AliasGroup> = Vec::new();
    let mut index: HashMap<Vec<i8>, usize> = HashMap::new();
    // terms arrive sorted by order then lexicographically, so the first
    // member of each group is its representative
    for term in terms {
        let col = contrast(table, &term);
        if col.iter().all(|&c| c == col[0]) {
            continue;
        }
        let sign = col[0];
        let key: Vec<i8> = col.iter().map(|&c| c * sign).collect();
        match index.get(&key) {
            Some(&g) => {
                let rel = sign * groups[g].1[0];
                groups[g].2.push((term, rel));
            }
            None => {
                index.insert(key, groups.len());
                groups.push((term, col, Vec::new()));
            }
        }
    }

    let run_of: Vec<usize> = table.rows().iter().map(|r| r.run).collect();
    Ok(groups
        .into_iter()
        .map(|(term, col, aliases)| {
            let (mut sp, mut np, mut sm, mut nm) = (0.0, 0usize, 0.0, 0usize);
            for (r, &run) in table.rows().iter().zip(&run_of) {
                if col[run] > 0 {
                    sp += r.response;
                    np += 1;
                } else {
                    sm += r.response;
                    nm += 1;
                }
            }
            EffectEstimate { label: term.label(table.factors()), term, value: sp / np as f64 - sm / nm as f64, aliases }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfNormalPoint {
    pub quantile: f64,
    pub abs_effect: f64,
    pub term: Term,
    pub label: String,
}

/// Absolute effects sorted ascending against half-normal quantiles
/// `Φ⁻¹(0.5 + 0.5·(i − 0.5)/m)`.
pub fn half_normal(effects: &[EffectEstimate]) -> Result<Vec<HalfNormalPoint>> {
    let m = effects.len();
    if m < 2 {
        return Err(Error::Invalid("half-normal scoring needs at least two effects".into()));
    }
    let mut sorted: Vec<&EffectEstimate> = effects.iter().collect();
    sorted.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()).then_with(|| a.label.cmp(&b.label)));
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| HalfNormalPoint {
            quantile: normal_quantile(0.5 + 0.5 * (i as f64 + 0.5) / m as f64),
            abs_effect: e.value.abs(),
            term: e.term.clone(),
            label: e.label.clone(),
        })
        .collect())
}

/// The `k` largest effects by magnitude, ties broken by label.
pub fn top_k(effects: &[EffectEstimate], k: usize) -> Vec<&EffectEstimate> {
    let mut v: Vec<&EffectEstimate> = effects.iter().collect();
    v.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()).then_with(|| a.label.cmp(&b.label)));
    v.truncate(k);
    v
}
