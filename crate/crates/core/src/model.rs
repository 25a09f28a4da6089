//! Shared domain types: factors, designs, terms and response tables.
//!
//! Runs store level *indices*; labels only appear at I/O boundaries.
//! Every type here is immutable once constructed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Control,
    Noise,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Level {
    pub fn categorical(label: impl Into<String>) -> Self {
        Level { label: label.into(), value: None }
    }

    pub fn numeric(label: impl Into<String>, value: f64) -> Self {
        Level { label: label.into(), value: Some(value) }
    }
}

/// A named experimental variable.
///
/// Numeric factors keep their values for plot axes; analysis always treats
/// levels as categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorRepr", into = "FactorRepr")]
pub struct Factor {
    name: String,
    levels: Vec<Level>,
    role: Role,
    kind: FactorKind,
}

#[derive(Serialize, Deserialize)]
struct FactorRepr {
    name: String,
    levels: Vec<Level>,
    #[serde(default)]
    role: Role,
    kind: FactorKind,
}

impl TryFrom<FactorRepr> for Factor {
    type Error = Error;

    fn try_from(r: FactorRepr) -> Result<Self> {
        Factor::new(r.name, r.kind, r.levels, r.role)
    }
}

impl From<Factor> for FactorRepr {
    fn from(f: Factor) -> Self {
        FactorRepr { name: f.name, levels: f.levels, role: f.role, kind: f.kind }
    }
}

impl Factor {
    pub fn new(name: impl Into<String>, kind: FactorKind, levels: Vec<Level>, role: Role) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidFactor { name: name.clone(), reason };
        if name.is_empty() || name.contains(',') || name.contains(':') {
            return Err(invalid("name must be nonempty without ',' or ':'".into()));
        }
        if levels.len() < 2 {
            return Err(invalid(format!("needs at least 2 levels, got {}", levels.len())));
        }
        Self::check_levels(&name, kind, &levels)?;
        Ok(Factor { name, levels, role, kind })
    }

    fn check_levels(name: &str, kind: FactorKind, levels: &[Level]) -> Result<()> {
        let mut seen = HashSet::new();
        for l in levels {
            if !seen.insert(l.label.as_str()) {
                return Err(Error::InvalidFactor {
                    name: name.to_string(),
                    reason: format!("duplicate level `{}`", l.label),
                });
            }
            let ok = match kind {
                FactorKind::Numeric => l.value.is_some_and(f64::is_finite),
                FactorKind::Categorical => l.value.is_none(),
            };
            if !ok {
                return Err(Error::InvalidFactor {
                    name: name.to_string(),
                    reason: format!("level `{}` does not match factor kind {kind:?}", l.label),
                });
            }
        }
        Ok(())
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Result<Self> {
        let levels = labels.iter().map(|l| Level::categorical(l.as_ref())).collect();
        Factor::new(name, FactorKind::Categorical, levels, Role::Unassigned)
    }

    /// Numeric factor labelled by the shortest decimal form of each value.
    pub fn numeric(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        let levels = values.iter().map(|&v| Level::numeric(format_number(v), v)).collect();
        Factor::new(name, FactorKind::Numeric, levels, Role::Unassigned)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn label(&self, index: usize) -> &str {
        &self.levels[index].label
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    /// Coded value of a two-level factor: first level -1, second +1.
    pub fn coded(&self, index: usize) -> Option<f64> {
        match (self.levels.len(), index) {
            (2, 0) => Some(-1.0),
            (2, 1) => Some(1.0),
            _ => None,
        }
    }

    /// Restrict to the given level indices (kept in their original order).
    /// A restriction may leave a single level.
    pub(crate) fn restricted(&self, keep: &[usize]) -> Factor {
        Factor {
            name: self.name.clone(),
            levels: keep.iter().map(|&i| self.levels[i].clone()).collect(),
            role: self.role,
            kind: self.kind,
        }
    }
}

pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}

/// A main effect (one factor) or interaction (several factors), stored as
/// sorted factor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term(Vec<usize>);

impl Term {
    pub fn new(factors: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = factors.into_iter().collect();
        v.sort_unstable();
        let n = v.len();
        v.dedup();
        if v.is_empty() || v.len() != n {
            return Err(Error::Invalid("a term needs at least one factor and no repeats".into()));
        }
        Ok(Term(v))
    }

    pub fn main(factor: usize) -> Self {
        Term(vec![factor])
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, factor: usize) -> bool {
        self.0.binary_search(&factor).is_ok()
    }

    /// `method:tail` style label.
    pub fn label(&self, factors: &[Factor]) -> String {
        self.0.iter().map(|&i| factors[i].name()).collect::<Vec<_>>().join(":")
    }

    /// Every term up to `max_order` over `n_factors` factors, ordered by
    /// order and then lexicographically.
    pub fn all_up_to(n_factors: usize, max_order: usize) -> Vec<Term> {
        let mut out = Vec::new();
        for k in 1..=max_order.min(n_factors) {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                out.push(Term(idx.clone()));
                // next k-combination
                let mut i = k;
                while i > 0 && idx[i - 1] == n_factors - k + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for j in i..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    FullFactorial,
    FractionalFactorial { generators: Vec<String> },
    Crossed { control: Box<Design>, noise: Box<Design> },
    Manual,
}

/// An ordered list of runs over a set of factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignRepr", into = "DesignRepr")]
pub struct Design {
    factors: Vec<Factor>,
    runs: Vec<Vec<usize>>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct DesignRepr {
    factors: Vec<Factor>,
    runs: Vec<Vec<usize>>,
    provenance: Provenance,
}

impl TryFrom<DesignRepr> for Design {
    type Error = Error;

    fn try_from(r: DesignRepr) -> Result<Self> {
        Design::new(r.factors, r.runs, r.provenance)
    }
}

impl From<Design> for DesignRepr {
    fn from(d: Design) -> Self {
        DesignRepr { factors: d.factors, runs: d.runs, provenance: d.provenance }
    }
}

impl Design {
    pub fn new(factors: Vec<Factor>, runs: Vec<Vec<usize>>, provenance: Provenance) -> Result<Self> {
        let mut names = HashSet::new();
        for f in &factors {
            if !names.insert(f.name()) {
                return Err(Error::InvalidDesign(format!("duplicate factor `{}`", f.name())));
            }
        }
        if runs.is_empty() {
            return Err(Error::InvalidDesign("design has no runs".into()));
        }
        let mut seen = HashSet::with_capacity(runs.len());
        for run in &runs {
            if run.len() != factors.len() {
                return Err(Error::InvalidDesign(format!(
                    "run has {} levels but design has {} factors",
                    run.len(),
                    factors.len()
                )));
            }
            for (f, &l) in factors.iter().zip(run) {
                if l >= f.n_levels() {
                    return Err(Error::OutOfRangeLevel {
                        factor: f.name().to_string(),
                        index: l,
                        levels: f.n_levels(),
                    });
                }
            }
            if !seen.insert(run.as_slice()) {
                return Err(Error::InvalidDesign(format!("duplicated run {}", describe_run(&factors, run))));
            }
        }
        Ok(Design { factors, runs, provenance })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn runs(&self) -> &[Vec<usize>] {
        &self.runs
    }

    pub fn run(&self, i: usize) -> &[usize] {
        &self.runs[i]
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors.iter().position(|f| f.name() == name).ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    /// Number of cells in the complete cross of all factor levels.
    pub fn full_size(&self) -> usize {
        self.factors.iter().map(Factor::n_levels).product()
    }

    pub fn is_full_factorial(&self) -> bool {
        self.runs.len() == self.full_size()
    }

    pub fn describe_run(&self, run: usize) -> String {
        describe_run(&self.factors, &self.runs[run])
    }

    /// Same runs with new roles assigned by factor position.
    pub(crate) fn with_roles(mut self, role: Role) -> Self {
        for f in &mut self.factors {
            f.role = role;
        }
        self
    }
}

pub(crate) fn describe_run(factors: &[Factor], levels: &[usize]) -> String {
    factors.iter().zip(levels).map(|(f, &l)| format!("{}={}", f.name(), f.label(l))).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Index into the design's runs.
    pub run: usize,
    /// 1-based replicate index.
    pub replicate: u32,
    pub response: f64,
}

/// Design runs joined with one response per (run, replicate).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    design: Design,
    rows: Vec<Observation>,
}

impl ResponseTable {
    pub fn new(design: Design, rows: Vec<Observation>) -> Result<Self> {
        for r in &rows {
            if r.run >= design.n_runs() {
                return Err(Error::Invalid(format!(
                    "row references run {} but design has {} runs",
                    r.run,
                    design.n_runs()
                )));
            }
            if r.replicate == 0 {
                return Err(Error::Invalid("replicate indices start at 1".into()));
            }
            if !r.response.is_finite() {
                return Err(Error::Invalid(format!(
                    "missing or non-finite response at {}",
                    design.describe_run(r.run)
                )));
            }
        }
        Ok(ResponseTable { design, rows })
    }

    /// One replicate, responses given in design run order.
    pub fn from_responses(design: Design, responses: &[f64]) -> Result<Self> {
        if responses.len() != design.n_runs() {
            return Err(Error::Invalid(format!("{} responses for {} runs", responses.len(), design.n_runs())));
        }
        let rows =
            responses.iter().enumerate().map(|(run, &response)| Observation { run, replicate: 1, response }).collect();
        ResponseTable::new(design, rows)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn factors(&self) -> &[Factor] {
        self.design.factors()
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn replicates(&self) -> u32 {
        self.rows.iter().map(|r| r.replicate).max().unwrap_or(0)
    }

    pub fn levels(&self, row: usize) -> &[usize] {
        self.design.run(self.rows[row].run)
    }

    pub fn responses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.response).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.rows.iter().map(|r| r.response).sum::<f64>() / self.rows.len() as f64
    }

    /// Check that every (run, replicate) pair occurs exactly once.
    pub fn check_balanced(&self) -> Result<()> {
        let reps = self.replicates();
        let mut counts: HashMap<(usize, u32), usize> = HashMap::new();
        for r in &self.rows {
            *counts.entry((r.run, r.replicate)).or_default() += 1;
        }
        let mut missing = Vec::new();
        let mut duplicated = Vec::new();
        for run in 0..self.design.n_runs() {
            for rep in 1..=reps.max(1) {
                match counts.get(&(run, rep)).copied().unwrap_or(0) {
                    1 => {}
                    0 => missing.push(format!("{} (replicate {rep})", self.design.describe_run(run))),
                    k => duplicated.push(format!("{} (replicate {rep}) x{k}", self.design.describe_run(run))),
                }
            }
        }
        if missing.is_empty() && duplicated.is_empty() {
            Ok(())
        } else {
            Err(Error::Unbalanced { missing, duplicated })
        }
    }

    /// Rows in canonical order: by run index, then replicate.
    pub fn canonical(&self) -> ResponseTable {
        let mut rows = self.rows.clone();
        rows.sort_by_key(|r| (r.run, r.replicate));
        ResponseTable { design: self.design.clone(), rows }
    }

    /// Keep only runs where `keep(levels)` holds; factor level sets shrink to
    /// the levels still in use.
    pub fn filter_runs(&self, keep: impl Fn(&[usize]) -> bool) -> Result<ResponseTable> {
        let kept_runs: Vec<usize> = (0..self.design.n_runs()).filter(|&i| keep(self.design.run(i))).collect();
        if kept_runs.is_empty() {
            return Err(Error::Invalid("filter removed every run".into()));
        }
        let factors = self.design.factors();
        // level remapping per factor
        let mut used: Vec<Vec<bool>> = factors.iter().map(|f| vec![false; f.n_levels()]).collect();
        for &i in &kept_runs {
            for (j, &l) in self.design.run(i).iter().enumerate() {
                used[j][l] = true;
            }
        }
        let mut new_factors = Vec::with_capacity(factors.len());
        let mut remap: Vec<Vec<usize>> = Vec::with_capacity(factors.len());
        for (f, u) in factors.iter().zip(&used) {
            let keep_idx: Vec<usize> = (0..f.n_levels()).filter(|&l| u[l]).collect();
            let mut m = vec![usize::MAX; f.n_levels()];
            for (new, &old) in keep_idx.iter().enumerate() {
                m[old] = new;
            }
            new_factors.push(f.restricted(&keep_idx));
            remap.push(m);
        }
        let mut run_map = vec![usize::MAX; self.design.n_runs()];
        let mut runs = Vec::with_capacity(kept_runs.len());
        for (new, &old) in kept_runs.iter().enumerate() {
            run_map[old] = new;
            runs.push(self.design.run(old).iter().enumerate().map(|(j, &l)| remap[j][l]).collect::<Vec<_>>());
        }
        let full: usize = new_factors.iter().map(Factor::n_levels).product();
        let provenance = if runs.len() == full { Provenance::FullFactorial } else { Provenance::Manual };
        let design = Design::new(new_factors, runs, provenance)?;
        let rows = self
            .rows
            .iter()
            .filter(|r| run_map[r.run] != usize::MAX)
            .map(|r| Observation { run: run_map[r.run], ..*r })
            .collect();
        ResponseTable::new(design, rows)
    }

    /// Drop every run where `factor` takes level `label`.
    pub fn exclude_level(&self, factor: &str, label: &str) -> Result<ResponseTable> {
        let (j, l) = self.locate(factor, label)?;
        self.filter_runs(|run| run[j] != l)
    }

    /// Keep only runs where `factor` takes one of `labels`.
    pub fn keep_levels<S: AsRef<str>>(&self, factor: &str, labels: &[S]) -> Result<ResponseTable> {
        let mut idx = Vec::new();
        let mut j = 0;
        for label in labels {
            let (jj, l) = self.locate(factor, label.as_ref())?;
            j = jj;
            idx.push(l);
        }
        self.filter_runs(|run| idx.contains(&run[j]))
    }

    fn locate(&self, factor: &str, label: &str) -> Result<(usize, usize)> {
        let j = self.design.factor_index(factor)?;
        let l = self.design.factors()[j]
            .level_index(label)
            .ok_or_else(|| Error::UnknownLevel { factor: factor.to_string(), level: label.to_string() })?;
        Ok((j, l))
    }

    /// Rows grouped by the level combination of `factors`, groups in
    /// lexicographic level order, rows within a group in stored order.
    pub(crate) fn group_by(&self, factors: &[usize]) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let run = self.design.run(r.run);
            let key = factors.iter().map(|&j| run[j]).collect();
            groups.entry(key).or_default().push(i);
        }
        groups
    }
}

/// Returns the table iff it is balanced-complete.
pub fn validate_table(table: ResponseTable) -> Result<ResponseTable> {
    table.check_balanced()?;
    Ok(table)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}
