//! Embedded type-I error rates (percent) for four two-sample tests of a
//! proportion over 108 population settings, in each tail.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{RunContext, Simulation};
use crate::csvio::read_table;
use crate::error::{Error, Result};
use crate::model::{Factor, ResponseTable, Role};

pub const KMM_CSV: &str = include_str!("../../data/kmm_table1.csv");

const ROWS: usize = 432;
const FACTORS: [&str; 5] = ["method", "tail", "n", "p0", "sigma"];

fn schema() -> Vec<Factor> {
    let c = |f: Result<Factor>| f.expect("static schema").with_role(Role::Control);
    let n = |f: Result<Factor>| f.expect("static schema").with_role(Role::Noise);
    vec![
        c(Factor::categorical("method", &["AN", "GV", "MS", "SL"])),
        c(Factor::categorical("tail", &["L", "R", "T"])),
        n(Factor::numeric("n", &[20.0, 30.0, 50.0])),
        n(Factor::numeric("p0", &[0.2, 0.3, 0.5, 0.7])),
        n(Factor::numeric("sigma", &[1.0, 2.0, 3.0])),
    ]
}

fn load() -> Result<ResponseTable> {
    let table = read_table(KMM_CSV.as_bytes(), Some(&schema()))?;
    if table.len() != ROWS || !table.design().is_full_factorial() {
        return Err(Error::InvalidDesign(format!(
            "embedded table has {} rows, expected a {ROWS}-run full factorial",
            table.len()
        )));
    }
    table.check_balanced()?;
    let an: Vec<f64> =
        table.rows().iter().enumerate().filter(|(i, _)| table.levels(*i)[0] == 0).map(|(_, r)| r.response).collect();
    let an_mean = an.iter().sum::<f64>() / an.len() as f64;
    if (an_mean - 7.6).abs() > 0.05 {
        return Err(Error::Invalid(format!("embedded AN mean {an_mean} is not 7.6")));
    }
    Ok(table)
}

/// The full 432-row table; factors `method, tail` are control, `n, p0,
/// sigma` are noise.
pub fn kmm_table() -> ResponseTable {
    static TABLE: OnceLock<ResponseTable> = OnceLock::new();
    TABLE.get_or_init(|| load().expect("embedded table is valid")).clone()
}

/// The 324 runs left after excluding method AN.
pub fn kmm_no_an() -> ResponseTable {
    kmm_table().exclude_level("method", "AN").expect("AN is a level of method")
}

/// AN excluded and only the extreme levels of n, p0 and sigma: 72 runs.
pub fn kmm_cheapo() -> ResponseTable {
    kmm_no_an()
        .keep_levels("n", &["20", "50"])
        .and_then(|t| t.keep_levels("p0", &["0.2", "0.7"]))
        .and_then(|t| t.keep_levels("sigma", &["1", "3"]))
        .expect("extreme levels exist")
}

/// Replays the embedded table: the response for a run is the table entry
/// at the run's `method, tail, n, p0, sigma` labels.
pub struct KmmReplay {
    lookup: HashMap<Vec<String>, f64>,
}

impl KmmReplay {
    pub fn new() -> Self {
        let t = kmm_table();
        let lookup = (0..t.len())
            .map(|i| {
                let key = t.levels(i).iter().zip(t.factors()).map(|(&l, f)| f.label(l).to_string()).collect();
                (key, t.rows()[i].response)
            })
            .collect();
        KmmReplay { lookup }
    }
}

impl Default for KmmReplay {
    fn default() -> Self {
        KmmReplay::new()
    }
}

impl Simulation for KmmReplay {
    fn name(&self) -> &str {
        "kmm"
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<f64> {
        let key = FACTORS
            .iter()
            .map(|f| ctx.label(f).map(str::to_string).ok_or_else(|| Error::UnknownFactor(f.to_string())))
            .collect::<Result<Vec<_>>>()?;
        self.lookup.get(&key).copied().ok_or_else(|| Error::Invalid(format!("no table entry for {}", key.join("/"))))
    }
}
