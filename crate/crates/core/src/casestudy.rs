//! The two worked studies, packaged as report bundles of text, CSV and SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anova::{fit_anova, AnovaTable};
use crate::csvio::table_to_string;
use crate::design::{fractional_factorial, report, Word};
use crate::effects::{effect_estimates, half_normal, marginal_means, top_k, EffectEstimate};
use crate::error::Result;
use crate::harness::{kmm_cheapo, kmm_no_an, kmm_table, run_study, Registry, RunOptions, StudyPlan};
use crate::model::{Factor, ResponseTable, Role, Term};
use crate::plot::{
    histogram_data, interaction2_data, interaction3_combined_data, main_effects_data, render_svg, PlotData, PlotKind,
};
use crate::trpd::{robustness_summary, RobustnessSummary};

/// Named output files, written together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.insert(name.into(), content);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmmStage {
    /// All 432 runs.
    Full,
    /// Method AN excluded: 324 runs.
    NoAn,
    /// AN excluded, extreme levels of n, p0, sigma only: 72 runs.
    Cheapo,
}

impl KmmStage {
    pub fn table(self) -> ResponseTable {
        match self {
            KmmStage::Full => kmm_table(),
            KmmStage::NoAn => kmm_no_an(),
            KmmStage::Cheapo => kmm_cheapo(),
        }
    }
}

pub const KMM_TARGET: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct KmmReport {
    pub table: ResponseTable,
    pub anova: AnovaTable,
    pub robustness: RobustnessSummary,
    pub bundle: ReportBundle,
}

fn svg(bundle: &mut ReportBundle, name: &str, data: &PlotData, kind: PlotKind, reference: Option<f64>) -> Result<()> {
    bundle.add(name, render_svg(data, kind, reference)?);
    Ok(())
}

pub fn casestudy_kmm(stage: KmmStage) -> Result<KmmReport> {
    let table = stage.table();
    let idx = |name: &str| table.design().factor_index(name);
    let (method, tail, p0, sigma) = (idx("method")?, idx("tail")?, idx("p0")?, idx("sigma")?);
    let anova = fit_anova(&table, 4)?;
    let robustness = robustness_summary(&table, &[method, tail], KMM_TARGET)?;

    let mut b = ReportBundle::default();
    b.add("anova.txt", anova.to_text());
    let mut csv = Vec::new();
    anova.write_csv(&mut csv)?;
    b.add("anova.csv", String::from_utf8(csv).expect("utf-8"));
    b.add("trpd.txt", robustness.to_text());

    let mut summary = String::new();
    writeln!(summary, "runs: {}", table.len()).unwrap();
    writeln!(summary, "grand mean: {:.4}", table.grand_mean()).unwrap();
    let means = marginal_means(&table, &Term::main(method))?;
    for c in &means.cells {
        writeln!(summary, "method={} mean: {:.4}", table.factors()[method].label(c.levels[0]), c.mean).unwrap();
    }
    writeln!(summary, "largest sums of squares:").unwrap();
    for r in anova.by_ss().iter().take(5) {
        writeln!(summary, "  {:<28} {:>10.2}", r.label, r.ss).unwrap();
    }
    b.add("summary.txt", summary);

    let all: Vec<usize> = (0..table.factors().len()).collect();
    svg(&mut b, "main_effects.svg", &main_effects_data(&table, &all)?, PlotKind::MainEffects, Some(KMM_TARGET))?;
    svg(
        &mut b,
        "interaction_method_tail.svg",
        &interaction2_data(&table, tail, method)?,
        PlotKind::Interaction2,
        Some(KMM_TARGET),
    )?;
    svg(
        &mut b,
        "interaction_tail_p0.svg",
        &interaction2_data(&table, p0, tail)?,
        PlotKind::Interaction2,
        Some(KMM_TARGET),
    )?;
    svg(
        &mut b,
        "trpd_histograms.svg",
        &histogram_data(&table, method, tail, 12)?,
        PlotKind::HistogramGrid,
        Some(KMM_TARGET),
    )?;
    for (name, noise) in [("p0", p0), ("sigma", sigma)] {
        svg(
            &mut b,
            &format!("interaction3_method_tail_{name}.svg"),
            &interaction3_combined_data(&table, &[method, tail], noise)?,
            PlotKind::Interaction3Combined,
            Some(KMM_TARGET),
        )?;
    }
    Ok(KmmReport { table, anova, robustness, bundle: b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlScale {
    /// Small training sets and test sets; minutes on one core.
    Desk,
    /// Full-size factor levels and 10,000-row test sets.
    Paper,
}

pub const SL_GENERATORS: [&str; 2] = ["ABCE", "BCDF"];

/// Factor levels for the learning study. Letters A-G in order: n, q, ENE,
/// beta.mu, sigma, x.cor, model.
pub fn sl_factors(scale: SlScale) -> Vec<Factor> {
    let (n, q, ene) = match scale {
        SlScale::Desk => ([100.0, 250.0], [10.0, 20.0], [5.0, 10.0]),
        SlScale::Paper => ([250.0, 1000.0], [20.0, 50.0], [10.0, 20.0]),
    };
    let noise = |name: &str, v: &[f64]| Factor::numeric(name, v).expect("static levels").with_role(Role::Noise);
    vec![
        noise("n", &n),
        noise("q", &q),
        noise("ENE", &ene),
        noise("beta.mu", &[1.0, 3.0]),
        noise("sigma", &[0.5, 2.0]),
        noise("x.cor", &[0.0, 0.8]),
        Factor::categorical("model", &["ridge", "lasso"]).expect("static levels").with_role(Role::Control),
    ]
}

pub fn sl_plan(scale: SlScale, master_seed: u64) -> Result<StudyPlan> {
    let gens = SL_GENERATORS.iter().map(|g| Word::parse(g)).collect::<Result<Vec<_>>>()?;
    let design = fractional_factorial(sl_factors(scale), &gens)?;
    let test_size = match scale {
        SlScale::Desk => 2000.0,
        SlScale::Paper => 10_000.0,
    };
    Ok(StudyPlan::new(design, "sl", 1, master_seed).with_param("test_size", test_size).with_param("folds", 10.0))
}

#[derive(Debug, Clone)]
pub struct SlReport {
    pub table: ResponseTable,
    /// All estimable contrasts, labelled by their lowest-order alias.
    pub effects: Vec<EffectEstimate>,
    pub design_report: String,
    pub bundle: ReportBundle,
}

impl SlReport {
    pub fn effect(&self, label: &str) -> Option<f64> {
        self.effects.iter().find(|e| e.label == label).map(|e| e.value)
    }

    /// Whether `label` has the largest absolute estimate.
    pub fn is_largest(&self, label: &str) -> bool {
        top_k(&self.effects, 1).first().is_some_and(|e| e.label == label)
    }

    /// Mean response at each level of the named factor.
    pub fn level_means(&self, factor: &str) -> Result<Vec<(String, f64)>> {
        let j = self.table.design().factor_index(factor)?;
        let f = &self.table.factors()[j];
        Ok(marginal_means(&self.table, &Term::main(j))?
            .cells
            .iter()
            .map(|c| (f.label(c.levels[0]).to_string(), c.mean))
            .collect())
    }
}

pub fn casestudy_sl(master_seed: u64, scale: SlScale, opts: &RunOptions) -> Result<SlReport> {
    let plan = sl_plan(scale, master_seed)?;
    let design_report = report(&plan.design, 3)?;
    let table = run_study(&plan, &Registry::builtin(), opts)?.table;
    let k = table.factors().len();
    let effects = effect_estimates(&table, k)?;

    let mut b = ReportBundle::default();
    b.add("design.txt", design_report.clone());
    b.add("responses.csv", table_to_string(&table));
    let mut txt = String::from("effect,estimate,aliases\n");
    for e in top_k(&effects, effects.len()) {
        let aliases: Vec<String> = e.aliases.iter().map(|(t, _)| t.label(table.factors())).collect();
        writeln!(txt, "{},{:.6},{}", e.label, e.value, aliases.join(" ")).unwrap();
    }
    b.add("effects.csv", txt);

    let points = half_normal(&effects)?;
    svg(&mut b, "halfnormal.svg", &PlotData::HalfNormal { points, label_top: 6 }, PlotKind::HalfNormal, None)?;
    let all: Vec<usize> = (0..k).collect();
    svg(&mut b, "main_effects.svg", &main_effects_data(&table, &all)?, PlotKind::MainEffects, None)?;
    let model = table.design().factor_index("model")?;
    for name in ["beta.mu", "sigma"] {
        let j = table.design().factor_index(name)?;
        svg(
            &mut b,
            &format!("interaction_{name}_model.svg"),
            &interaction2_data(&table, j, model)?,
            PlotKind::Interaction2,
            None,
        )?;
    }
    Ok(SlReport { table, effects, design_report, bundle: b })
}
