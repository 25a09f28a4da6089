//! Robust parameter analysis: summarize the response within each
//! control-factor combination across all noise conditions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ResponseTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub levels: Vec<usize>,
    /// Control level labels joined by `/`, e.g. `GV/L`.
    pub label: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Mean squared deviation from target, with exceedances scaled by the
    /// over-target penalty.
    pub msd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessSummary {
    pub control: Vec<usize>,
    pub target: f64,
    pub over_target_penalty: f64,
    /// Ranked by MSD, then SD, then label.
    pub groups: Vec<GroupSummary>,
}

impl RobustnessSummary {
    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>4}  {:<12} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "rank", "control", "n", "mean", "sd", "min", "max", "msd"
        );
        for (i, g) in self.groups.iter().enumerate() {
            out.push_str(&format!(
                "{:>4}  {:<12} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}\n",
                i + 1,
                g.label,
                g.count,
                g.mean,
                g.sd,
                g.min,
                g.max,
                g.msd
            ));
        }
        out
    }
}

/// Resolve factor names to indices.
pub fn factor_indices<S: AsRef<str>>(table: &ResponseTable, names: &[S]) -> Result<Vec<usize>> {
    names.iter().map(|n| table.design().factor_index(n.as_ref())).collect()
}

fn combined_label(table: &ResponseTable, control: &[usize], levels: &[usize]) -> String {
    control.iter().zip(levels).map(|(&j, &l)| table.factors()[j].label(l)).collect::<Vec<_>>().join("/")
}

fn groups(table: &ResponseTable, control: &[usize]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if control.is_empty() {
        return Err(Error::EmptyControlSet);
    }
    if let Some(&j) = control.iter().find(|&&j| j >= table.factors().len()) {
        return Err(Error::UnknownFactor(format!("#{j}")));
    }
    table.check_balanced()?;
    let mut g: Vec<(Vec<usize>, Vec<usize>)> = table.group_by(control).into_iter().collect();
    for (_, rows) in &mut g {
        rows.sort_by_key(|&i| (table.rows()[i].run, table.rows()[i].replicate));
    }
    let n0 = g[0].1.len();
    if let Some((levels, rows)) = g.iter().find(|(_, rows)| rows.len() != n0) {
        return Err(Error::Unbalanced {
            missing: vec![format!(
                "control combination {} has {} responses, expected {n0}",
                combined_label(table, control, levels),
                rows.len()
            )],
            duplicated: Vec::new(),
        });
    }
    Ok(g)
}

pub fn robustness_summary(table: &ResponseTable, control: &[usize], target: f64) -> Result<RobustnessSummary> {
    robustness_summary_with_penalty(table, control, target, 1.0)
}

/// As [`robustness_summary`], with squared deviations above target scaled by
/// `over_target_penalty` (1 is symmetric).
pub fn robustness_summary_with_penalty(
    table: &ResponseTable,
    control: &[usize],
    target: f64,
    over_target_penalty: f64,
) -> Result<RobustnessSummary> {
    if over_target_penalty.is_nan() || over_target_penalty <= 0.0 {
        return Err(Error::Invalid("over-target penalty must be positive".into()));
    }
    let mut out = Vec::new();
    for (levels, rows) in groups(table, control)? {
        let ys: Vec<f64> = rows.iter().map(|&i| table.rows()[i].response).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = if ys.len() > 1 { ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let msd = ys
            .iter()
            .map(|&y| {
                let d2 = (y - target).powi(2);
                if y > target {
                    over_target_penalty * d2
                } else {
                    d2
                }
            })
            .sum::<f64>()
            / n;
        out.push(GroupSummary {
            label: combined_label(table, control, &levels),
            levels,
            mean,
            sd: var.sqrt(),
            min: ys.iter().copied().fold(f64::INFINITY, f64::min),
            max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: ys.len(),
            msd,
        });
    }
    out.sort_by(|a, b| a.msd.total_cmp(&b.msd).then(a.sd.total_cmp(&b.sd)).then_with(|| a.label.cmp(&b.label)));
    Ok(RobustnessSummary { control: control.to_vec(), target, over_target_penalty, groups: out })
}

/// Means for every (combined control level, noise level) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionGrid {
    pub control_labels: Vec<String>,
    pub noise_factor: String,
    pub noise_labels: Vec<String>,
    /// `means[c][l]`: control combination `c`, noise level `l`.
    pub means: Vec<Vec<f64>>,
    pub count: usize,
}

impl InteractionGrid {
    pub fn row(&self, control_label: &str) -> Option<&[f64]> {
        self.control_labels.iter().position(|l| l == control_label).map(|i| self.means[i].as_slice())
    }
}

pub fn control_noise_interaction(
    table: &ResponseTable,
    control: &[usize],
    noise_factor: usize,
) -> Result<InteractionGrid> {
    if control.contains(&noise_factor) {
        return Err(Error::Invalid("noise factor is also a control factor".into()));
    }
    if noise_factor >= table.factors().len() {
        return Err(Error::UnknownFactor(format!("#{noise_factor}")));
    }
    let control_groups = groups(table, control)?;
    let noise = &table.factors()[noise_factor];
    let mut means = Vec::with_capacity(control_groups.len());
    let mut labels = Vec::with_capacity(control_groups.len());
    let mut count = 0;
    for (levels, rows) in &control_groups {
        let mut sums = vec![0.0; noise.n_levels()];
        let mut counts = vec![0usize; noise.n_levels()];
        for &i in rows {
            let l = table.levels(i)[noise_factor];
            sums[l] += table.rows()[i].response;
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c != counts[0]) || counts[0] == 0 {
            return Err(Error::Unbalanced {
                missing: vec![format!(
                    "noise levels unevenly represented within {}",
                    combined_label(table, control, levels)
                )],
                duplicated: Vec::new(),
            });
        }
        count = counts[0];
        labels.push(combined_label(table, control, levels));
        means.push(sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect());
    }
    Ok(InteractionGrid {
        control_labels: labels,
        noise_factor: noise.name().to_string(),
        noise_labels: noise.levels().iter().map(|l| l.label.clone()).collect(),
        means,
        count,
    })
}

/// Raw responses per control combination, in canonical run order.
pub fn response_distributions(table: &ResponseTable, control: &[usize]) -> Result<Vec<(String, Vec<f64>)>> {
    Ok(groups(table, control)?
        .into_iter()
        .map(|(levels, rows)| {
            (combined_label(table, control, &levels), rows.iter().map(|&i| table.rows()[i].response).collect())
        })
        .collect())
}
