//! JSON study specifications.
//!
//! ```json
//! {
//!   "simulation": "sl",
//!   "factors": [
//!     {"name": "n", "levels": [100, 250]},
//!     {"name": "model", "levels": ["ridge", "lasso"], "role": "control"}
//!   ],
//!   "design": {"type": "fraction", "generators": ["ABCE", "BCDF"]},
//!   "replicates": 1,
//!   "master_seed": 42,
//!   "params": {"test_size": 2000},
//!   "output": "responses.csv"
//! }
//! ```
//!
//! Numeric JSON levels make a numeric factor; any string level makes the
//! factor categorical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{crossed_array, fractional_factorial, full_factorial, Word};
use crate::error::{Error, Result};
use crate::harness::{PilotSubset, StudyPlan};
use crate::model::{Design, Factor, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub role: Option<Role>,
}

impl FactorSpec {
    pub fn build(&self) -> Result<Factor> {
        let numbers: Option<Vec<f64>> = self
            .levels
            .iter()
            .map(|l| match l {
                LevelSpec::Number(v) => Some(*v),
                LevelSpec::Label(_) => None,
            })
            .collect();
        let f = match numbers {
            Some(v) => Factor::numeric(self.name.clone(), &v)?,
            None => {
                let labels: Vec<String> = self
                    .levels
                    .iter()
                    .map(|l| match l {
                        LevelSpec::Number(v) => format!("{v}"),
                        LevelSpec::Label(s) => s.clone(),
                    })
                    .collect();
                Factor::categorical(self.name.clone(), &labels)?
            }
        };
        Ok(match self.role {
            Some(r) => f.with_role(r),
            None => f,
        })
    }

    /// Parse `name=l1,l2,...` as used on the command line.
    pub fn parse(s: &str) -> Result<FactorSpec> {
        let (name, levels) = s
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("factor `{s}` must look like name=level1,level2")))?;
        let levels = levels
            .split(',')
            .map(|l| {
                let l = l.trim();
                l.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map_or_else(|| LevelSpec::Label(l.to_string()), LevelSpec::Number)
            })
            .collect();
        Ok(FactorSpec { name: name.trim().to_string(), levels, role: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DesignSpec {
    #[default]
    Full,
    Fraction {
        generators: Vec<String>,
    },
    /// Control factors (by name) crossed with the remaining factors. Each
    /// side is full unless generators are given; generator letters index
    /// that side's own factor list.
    Cross {
        control: Vec<String>,
        #[serde(default)]
        control_generators: Vec<String>,
        #[serde(default)]
        noise_generators: Vec<String>,
    },
}

fn parse_words(ws: &[String]) -> Result<Vec<Word>> {
    ws.iter().map(|w| Word::parse(w)).collect()
}

fn side(factors: Vec<Factor>, generators: &[String]) -> Result<Design> {
    if generators.is_empty() {
        full_factorial(factors)
    } else {
        fractional_factorial(factors, &parse_words(generators)?)
    }
}

impl DesignSpec {
    pub fn build(&self, factors: Vec<Factor>) -> Result<Design> {
        match self {
            DesignSpec::Full => full_factorial(factors),
            DesignSpec::Fraction { generators } => fractional_factorial(factors, &parse_words(generators)?),
            DesignSpec::Cross { control, control_generators, noise_generators } => {
                for c in control {
                    if !factors.iter().any(|f| f.name() == c) {
                        return Err(Error::UnknownFactor(c.clone()));
                    }
                }
                let (ctl, noise): (Vec<Factor>, Vec<Factor>) =
                    factors.into_iter().partition(|f| control.iter().any(|c| c == f.name()));
                // keep the order given in `control`
                let mut ctl_sorted = Vec::with_capacity(ctl.len());
                for c in control {
                    ctl_sorted.push(ctl.iter().find(|f| f.name() == c).cloned().expect("checked"));
                }
                if noise.is_empty() {
                    return Err(Error::InvalidDesign("crossed array needs at least one noise factor".into()));
                }
                crossed_array(&side(ctl_sorted, control_generators)?, &side(noise, noise_generators)?)
            }
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub simulation: String,
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default = "one")]
    pub replicates: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub pilot: Option<PilotSubset>,
    /// Response table CSV path.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl StudySpec {
    pub fn from_json(s: &str) -> Result<StudySpec> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<StudySpec> {
        StudySpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn design(&self) -> Result<Design> {
        let factors = self.factors.iter().map(FactorSpec::build).collect::<Result<Vec<_>>>()?;
        self.design.build(factors)
    }

    pub fn plan(&self) -> Result<StudyPlan> {
        Ok(StudyPlan {
            design: self.design()?,
            replicates: self.replicates,
            master_seed: self.master_seed,
            simulation: self.simulation.clone(),
            params: self.params.clone(),
            pilot: self.pilot.clone(),
        })
    }
}
