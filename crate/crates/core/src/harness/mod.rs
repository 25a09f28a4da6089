//! Executes a design against a registered simulation.
//!
//! Each (run, replicate) cell gets a seed derived from the master seed by a
//! counter-based mixer, so a cell's response depends only on the plan and
//! never on worker count or scheduling. Simulations must be pure functions
//! of their [`RunContext`].

mod kmm;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Design, Observation, Provenance, ResponseTable};
use crate::seed::run_seed;

pub use kmm::{kmm_cheapo, kmm_no_an, kmm_table, KmmReplay, KMM_CSV};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "SIMDOE_WORKERS";

/// Everything a simulation may depend on for one cell.
pub struct RunContext<'a> {
    pub design: &'a Design,
    pub run: usize,
    pub replicate: u32,
    pub seed: u64,
    pub params: &'a BTreeMap<String, f64>,
}

impl RunContext<'_> {
    pub fn levels(&self) -> &[usize] {
        self.design.run(self.run)
    }

    /// Level label of the named factor in this run.
    pub fn label(&self, factor: &str) -> Option<&str> {
        let j = self.design.factor_index(factor).ok()?;
        Some(self.design.factors()[j].label(self.levels()[j]))
    }

    /// Numeric value of the named factor in this run, else the named
    /// parameter.
    pub fn value(&self, name: &str) -> Option<f64> {
        match self.design.factor_index(name) {
            Ok(j) => {
                let l = &self.design.factors()[j].levels()[self.levels()[j]];
                l.value.or_else(|| l.label.parse().ok())
            }
            Err(_) => self.params.get(name).copied(),
        }
    }

    pub fn require(&self, name: &str) -> Result<f64> {
        self.value(name).ok_or_else(|| Error::Invalid(format!("no factor or parameter `{name}`")))
    }
}

pub trait Simulation: Send + Sync {
    fn name(&self) -> &str;
    fn run(&self, ctx: &RunContext<'_>) -> Result<f64>;
}

/// Coded linear response plus standard normal noise; a cheap stand-in used
/// by examples and tests.
pub struct Demo;

impl Simulation for Demo {
    fn name(&self) -> &str {
        "demo"
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<f64> {
        let mut y = 0.0;
        for (k, (f, &l)) in ctx.design.factors().iter().zip(ctx.levels()).enumerate() {
            let centered = l as f64 - (f.n_levels() - 1) as f64 / 2.0;
            y += (k + 1) as f64 * centered;
        }
        let eps: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(ctx.seed));
        Ok(y + ctx.params.get("noise").copied().unwrap_or(1.0) * eps)
    }
}

#[derive(Clone, Default)]
pub struct Registry {
    sims: BTreeMap<String, Arc<dyn Simulation>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// `demo`, `kmm` (replays the embedded table) and `sl`.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Arc::new(Demo));
        r.register(Arc::new(KmmReplay::new()));
        r.register(Arc::new(crate::slstudy::SlSimulation::default()));
        r
    }

    pub fn register(&mut self, sim: Arc<dyn Simulation>) {
        self.sims.insert(sim.name().to_string(), sim);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Simulation>> {
        self.sims.get(name).cloned().ok_or_else(|| Error::UnknownSimulation(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.sims.keys().map(String::as_str).collect()
    }
}

/// Which runs a pilot executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PilotSubset {
    /// Explicit run indices.
    Runs { runs: Vec<usize> },
    /// Every `step`-th run starting at 0.
    Every { step: usize },
    /// The first `count` runs.
    First { count: usize },
}

impl PilotSubset {
    pub fn select(&self, n_runs: usize) -> Result<Vec<usize>> {
        let runs: Vec<usize> = match self {
            PilotSubset::Runs { runs } => {
                if let Some(&r) = runs.iter().find(|&&r| r >= n_runs) {
                    return Err(Error::Invalid(format!("pilot run {r} out of range ({n_runs} runs)")));
                }
                let mut v = runs.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            PilotSubset::Every { step } if *step > 0 => (0..n_runs).step_by(*step).collect(),
            PilotSubset::Every { .. } => Vec::new(),
            PilotSubset::First { count } => (0..n_runs.min(*count)).collect(),
        };
        if runs.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(runs)
    }

    /// Parse `runs:0,5,9`, `every:4` or `first:8`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad pilot spec `{s}`; use runs:i,j,..|every:k|first:k"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match kind {
            "runs" => Ok(PilotSubset::Runs { runs: arg.split(',').map(num).collect::<Result<_>>()? }),
            "every" => Ok(PilotSubset::Every { step: num(arg)? }),
            "first" => Ok(PilotSubset::First { count: num(arg)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub design: Design,
    pub replicates: u32,
    pub master_seed: u64,
    pub simulation: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub pilot: Option<PilotSubset>,
}

impl StudyPlan {
    pub fn new(design: Design, simulation: impl Into<String>, replicates: u32, master_seed: u64) -> Self {
        StudyPlan {
            design,
            replicates,
            master_seed,
            simulation: simulation.into(),
            params: BTreeMap::new(),
            pilot: None,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Invalid("replicates must be at least 1".into()));
        }
        registry.get(&self.simulation).map(|_| ())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Explicit worker count; otherwise `SIMDOE_WORKERS`, otherwise all
    /// cores.
    pub workers: Option<usize>,
    /// Record failures and continue instead of aborting.
    pub keep_going: bool,
}

impl RunOptions {
    pub fn workers(n: usize) -> Self {
        RunOptions { workers: Some(n), keep_going: false }
    }

    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok())
            .filter(|&w| w > 0)
            .unwrap_or_else(rayon::current_num_threads)
    }
}

#[derive(Debug)]
pub struct StudyOutput {
    pub table: ResponseTable,
    /// Failed cells (only populated with `keep_going`).
    pub failures: Vec<Error>,
}

/// Run every (run, replicate) cell of the plan, or only the pilot subset if
/// one is set.
pub fn run_study(plan: &StudyPlan, registry: &Registry, opts: &RunOptions) -> Result<StudyOutput> {
    plan.validate(registry)?;
    let sim = registry.get(&plan.simulation)?;
    let runs: Vec<usize> = match &plan.pilot {
        Some(p) => p.select(plan.design.n_runs())?,
        None => (0..plan.design.n_runs()).collect(),
    };
    let cells: Vec<(usize, u32)> = runs.iter().flat_map(|&r| (1..=plan.replicates).map(move |k| (r, k))).collect();

    let eval = |&(run, replicate): &(usize, u32)| -> Result<f64> {
        let seed = run_seed(plan.master_seed, run, replicate);
        let ctx = RunContext { design: &plan.design, run, replicate, seed, params: &plan.params };
        let failure = |message: String| Error::SimulationFailure {
            run,
            replicate,
            seed,
            levels: plan.design.describe_run(run),
            message,
        };
        match sim.run(&ctx) {
            Ok(y) if y.is_finite() => Ok(y),
            Ok(y) => Err(failure(format!("non-finite response {y}"))),
            Err(e) => Err(failure(e.to_string())),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.resolved_workers())
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| cells.par_iter().map(eval).collect());

    // a pilot gets its own design over the selected runs, in original order
    let (design, index_of): (Design, Vec<usize>) = if plan.pilot.is_some() {
        let sub = runs.iter().map(|&r| plan.design.run(r).to_vec()).collect();
        let d = Design::new(plan.design.factors().to_vec(), sub, Provenance::Manual)?;
        let mut idx = vec![usize::MAX; plan.design.n_runs()];
        for (i, &r) in runs.iter().enumerate() {
            idx[r] = i;
        }
        (d, idx)
    } else {
        (plan.design.clone(), (0..plan.design.n_runs()).collect())
    };

    let mut rows = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for (&(run, replicate), res) in cells.iter().zip(results) {
        match res {
            Ok(response) => rows.push(Observation { run: index_of[run], replicate, response }),
            Err(e) if opts.keep_going => failures.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(StudyOutput { table: ResponseTable::new(design, rows)?, failures })
}

/// Run only `subset` of the plan's runs with the full study's seeds.
pub fn pilot(plan: &StudyPlan, subset: &PilotSubset, registry: &Registry, opts: &RunOptions) -> Result<ResponseTable> {
    let mut p = plan.clone();
    p.pilot = Some(subset.clone());
    Ok(run_study(&p, registry, opts)?.table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvio::table_to_string;
    use crate::design::full_factorial;
    use crate::model::Factor;

    fn plan() -> StudyPlan {
        let d = full_factorial(vec![
            Factor::numeric("a", &[0.0, 1.0]).unwrap(),
            Factor::categorical("b", &["x", "y", "z"]).unwrap(),
        ])
        .unwrap();
        StudyPlan::new(d, "demo", 3, 2024)
    }

    #[test]
    fn one_row_per_cell() {
        let out = run_study(&plan(), &Registry::builtin(), &RunOptions::workers(2)).unwrap();
        assert_eq!(out.table.len(), 18);
        out.table.check_balanced().unwrap();
    }

    #[test]
    fn replicates_use_different_seeds() {
        let d = full_factorial(vec![Factor::numeric("a", &[0.0, 1.0]).unwrap()]).unwrap();
        let single = Design::new(d.factors().to_vec(), vec![vec![0]], Provenance::Manual).unwrap();
        let out =
            run_study(&StudyPlan::new(single, "demo", 2, 1), &Registry::builtin(), &RunOptions::default()).unwrap();
        assert_eq!(out.table.len(), 2);
        assert_ne!(out.table.rows()[0].response, out.table.rows()[1].response);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let reg = Registry::builtin();
        let one = table_to_string(&run_study(&plan(), &reg, &RunOptions::workers(1)).unwrap().table);
        let many = table_to_string(&run_study(&plan(), &reg, &RunOptions::workers(8)).unwrap().table);
        assert_eq!(one, many);
    }

    #[test]
    fn pilot_is_a_subset_of_the_study() {
        let reg = Registry::builtin();
        let full = run_study(&plan(), &reg, &RunOptions::default()).unwrap().table;
        let sub = PilotSubset::Runs { runs: vec![5, 0] };
        let p = pilot(&plan(), &sub, &reg, &RunOptions::default()).unwrap();
        assert_eq!(p.len(), 6);
        for (i, row) in p.rows().iter().enumerate() {
            let orig = if p.levels(i) == full.design().run(0) { 0 } else { 5 };
            let twin = full.rows().iter().find(|r| r.run == orig && r.replicate == row.replicate).unwrap();
            assert_eq!(twin.response, row.response);
        }
        assert!(matches!(
            pilot(&plan(), &PilotSubset::First { count: 0 }, &reg, &RunOptions::default()),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn parse_pilot_specs() {
        assert_eq!(PilotSubset::parse("every:4").unwrap(), PilotSubset::Every { step: 4 });
        assert_eq!(PilotSubset::parse("runs:1,2").unwrap(), PilotSubset::Runs { runs: vec![1, 2] });
        assert!(PilotSubset::parse("some:3").is_err());
        assert_eq!(PilotSubset::Every { step: 3 }.select(7).unwrap(), vec![0, 3, 6]);
    }

    struct Flaky;
    impl Simulation for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn run(&self, ctx: &RunContext<'_>) -> Result<f64> {
            if ctx.run == 1 {
                Err(Error::Invalid("boom".into()))
            } else {
                Ok(1.0)
            }
        }
    }

    #[test]
    fn failures_abort_or_are_collected() {
        let mut reg = Registry::empty();
        reg.register(Arc::new(Flaky));
        let mut p = plan();
        p.simulation = "flaky".into();
        let err = run_study(&p, &reg, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SimulationFailure { run: 1, .. }));
        assert_eq!(err.exit_code(), 3);
        let opts = RunOptions { keep_going: true, ..Default::default() };
        let out = run_study(&p, &reg, &opts).unwrap();
        assert_eq!(out.failures.len(), 3);
        assert_eq!(out.table.len(), 15);
        p.simulation = "missing".into();
        assert!(matches!(run_study(&p, &reg, &opts), Err(Error::UnknownSimulation(_))));
    }
}
