//! Acceptance suite. Every criterion runs to completion and prints one
//! PASS/FAIL line; the process exits nonzero if any criterion failed.

mod common;

use std::time::{Duration, Instant};

use common::{
    brute_aliased, brute_fraction, brute_relation, check_against_oracle, compare_to_reference, f_grid, f_tail_oracle,
    random_designs, KMM_CHEAPO, KMM_FULL, KMM_NO_AN,
};
use simdoe::casestudy::{casestudy_kmm, casestudy_sl, sl_plan, KmmStage, SlScale, KMM_TARGET};
use simdoe::csvio::table_to_string;
use simdoe::design::{alias_structure, defining_relation, fractional_factorial, relation_of, resolution, Word};
use simdoe::effects::marginal_means;
use simdoe::harness::{kmm_no_an, kmm_table, run_study, Registry, RunOptions, StudyPlan};
use simdoe::heredity::{sample_pattern, solve_heredity_params};
use simdoe::seed::stream;
use simdoe::special::f_upper_tail;
use simdoe::trpd::{factor_indices, robustness_summary};
use simdoe::{design::full_factorial, Factor, Term};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

/// Collects failed clauses; an empty list means the criterion holds.
#[derive(Default)]
struct Clauses(Vec<String>);

impl Clauses {
    fn require(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.0.push(msg.into());
        }
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.require(elapsed <= limit, format!("took {elapsed:.2?}, limit {limit:?}"));
    }

    fn finish(self, detail: String) -> Check {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            Err(self.0.join("; "))
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn kmm_stage(stage: KmmStage, reference: &str, anchors: &[(&str, f64)], resid: (usize, f64)) -> (Clauses, String) {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let r = casestudy_kmm(stage).map_err(|e| e.to_string());
    let elapsed = t0.elapsed();
    let Ok(r) = r else {
        c.require(false, format!("{r:?}"));
        return (c, String::new());
    };
    for bad in compare_to_reference(&r.anova, reference, 0.15) {
        c.require(false, bad);
    }
    for &(label, ss) in anchors {
        let got = r.anova.row(label).map(|row| row.ss);
        c.require(got.is_some_and(|g| (g - ss).abs() <= 0.15), format!("{label} SS {got:?}, want {ss}"));
    }
    c.require(r.anova.residual.df == resid.0, format!("residual df {}", r.anova.residual.df));
    c.require((r.anova.residual.ss - resid.1).abs() <= 0.15, format!("residual SS {}", r.anova.residual.ss));
    c.within(elapsed, secs(5));
    let detail = format!("{} rows, residual df {}, {elapsed:.2?}", r.anova.rows.len(), r.anova.residual.df);
    (c, detail)
}

fn kmm_full() -> Check {
    let (mut c, detail) =
        kmm_stage(KmmStage::Full, KMM_FULL, &[("method", 555.1), ("method:tail", 2258.0)], (72, 21.2));
    if let Ok(r) = casestudy_kmm(KmmStage::Full) {
        let p = r.anova.row("n").and_then(|row| row.p);
        c.require(p.is_some_and(|p| format!("{p:.2e}") == "1.88e-7"), format!("p(n) = {p:?}"));
    }
    c.finish(detail)
}

fn kmm_no_an_stage() -> Check {
    let (c, detail) = kmm_stage(KmmStage::NoAn, KMM_NO_AN, &[("method:tail", 215.13)], (48, 9.33));
    c.finish(detail)
}

fn kmm_cheapo() -> Check {
    let (mut c, detail) = kmm_stage(KmmStage::Cheapo, KMM_CHEAPO, &[("method:tail", 51.55)], (4, 0.40));
    if let Ok(r) = casestudy_kmm(KmmStage::Cheapo) {
        let mut top: Vec<String> = r.anova.by_ss().iter().take(5).map(|row| row.label.clone()).collect();
        top.sort();
        let mut want = ["tail", "method:tail", "tail:p0", "method:tail:sigma", "method:tail:p0:sigma"];
        want.sort();
        c.require(top == want, format!("top five {top:?}"));
    }
    c.finish(detail)
}

fn an_diagnosis() -> Check {
    let mut c = Clauses::default();
    let t = kmm_table();
    let m = t.design().factor_index("method").map_err(|e| e.to_string())?;
    let an = t.factors()[m].level_index("AN").ok_or("no AN level")?;
    let means = marginal_means(&t, &Term::main(m)).map_err(|e| e.to_string())?;
    let mean = means.get(&[an]).map(|cell| cell.mean).unwrap_or(f64::NAN);
    let rows: Vec<f64> = (0..t.len()).filter(|&r| t.levels(r)[m] == an).map(|r| t.rows()[r].response).collect();
    let direct = rows.iter().sum::<f64>() / rows.len() as f64;
    c.require((mean - 7.6).abs() <= 0.05, format!("AN mean {mean}"));
    c.require((mean - direct).abs() < 1e-12, format!("marginal mean {mean} vs raw {direct}"));
    c.finish(format!("AN mean {mean:.3} over {} rows", rows.len()))
}

fn trpd_ranking() -> Check {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let t = kmm_no_an();
    let control = factor_indices(&t, &["method", "tail"]).map_err(|e| e.to_string())?;
    let s = robustness_summary(&t, &control, KMM_TARGET).map_err(|e| e.to_string())?;
    let again = robustness_summary(&t, &control, KMM_TARGET).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let msd = |label: &str| s.group(label).map(|g| g.msd).unwrap_or(f64::NAN);

    let worst_two = ["GV/T", "MS/T", "SL/T"].iter().map(|l| msd(l)).fold(f64::MIN, f64::max);
    let best_one = s.groups.iter().filter(|g| !g.label.ends_with("/T")).map(|g| g.msd).fold(f64::INFINITY, f64::min);
    c.require(worst_two < best_one, format!("two-tailed worst {worst_two} vs one-tailed best {best_one}"));
    c.require(
        msd("SL/L") < msd("GV/L") && msd("SL/L") < msd("MS/L"),
        format!("left-tailed MSD SL {} GV {} MS {}", msd("SL/L"), msd("GV/L"), msd("MS/L")),
    );
    let order = |s: &simdoe::trpd::RobustnessSummary| {
        s.groups.iter().map(|g| (g.label.clone(), g.msd.to_bits())).collect::<Vec<_>>()
    };
    c.require(order(&s) == order(&again), "ranking not deterministic");
    c.within(elapsed, secs(1));
    c.finish(format!("SL/L MSD {:.3}, {elapsed:.2?}", msd("SL/L")))
}

fn design_algebra() -> Check {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let letters = |s: &str| Word::parse(s).map(|w| w.mask()).map_err(|e| e.to_string());
    let words = |g: &[&str]| g.iter().map(|s| Word::parse(s)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string());
    let factors: Vec<Factor> =
        (0..7).map(|j| Factor::categorical(((b'A' + j as u8) as char).to_string(), &["lo", "hi"]).unwrap()).collect();

    let d = fractional_factorial(factors, &words(&["ABCE", "BCDF"])?).map_err(|e| e.to_string())?;
    c.require(d.n_runs() == 32, format!("{} runs", d.n_runs()));
    let brute = brute_fraction(7, &[letters("ABCE")?, letters("BCDF")?]);
    let coded: std::collections::BTreeSet<Vec<i8>> =
        d.runs().iter().map(|r| r.iter().map(|&l| if l == 0 { -1 } else { 1 }).collect()).collect();
    c.require(coded == brute.iter().cloned().collect(), "runs differ from enumeration");

    let rel = relation_of(&d).map_err(|e| e.to_string())?.ok_or("no relation recovered")?;
    c.require(rel.display() == "I = ABCE = BCDF = ADEF", rel.display());
    let mut found: Vec<u32> = rel.words().iter().filter(|w| !w.is_identity()).map(|w| w.mask()).collect();
    found.sort();
    let mut expected = brute_relation(&brute, 7);
    expected.sort();
    c.require(found == expected, "relation differs from enumeration");
    c.require(resolution(&rel).ok() == Some(4), "resolution is not IV");

    let aliases = alias_structure(&rel, 7).map_err(|e| e.to_string())?;
    let ab = Term::new([0, 1]).map_err(|e| e.to_string())?;
    let ce = Term::new([2, 4]).map_err(|e| e.to_string())?;
    c.require(aliases.are_aliased(&ab, &ce), "AB not aliased with CE");
    c.require(brute_aliased(&brute, letters("AB")?, letters("CE")?), "enumeration: AB not aliased with CE");
    let g = aliases.get(&Term::main(6)).ok_or("no alias entry for G")?;
    c.require(g.aliases.iter().all(|w| w.len() >= 5), "G has a short alias");
    let g_mask = letters("G")?;
    c.require(
        (1..128u32).all(|m| m == g_mask || !brute_aliased(&brute, g_mask, m) || m.count_ones() >= 5),
        "enumeration: G has a short alias",
    );

    let rel2 = defining_relation(&words(&["ABCF", "ABDEG"])?, 7).map_err(|e| e.to_string())?;
    let al2 = alias_structure(&rel2, 2).map_err(|e| e.to_string())?;
    let brute2 = brute_fraction(7, &[letters("ABCF")?, letters("ABDEG")?]);
    let pairs: Vec<Term> = (0..7).flat_map(|i| (i + 1..7).map(move |j| Term::new([i, j]).unwrap())).collect();
    let lib = pairs.iter().filter(|t| al2.get(t).is_some_and(|a| a.visible(2).next().is_some())).count();
    let enumerated = pairs
        .iter()
        .filter(|t| {
            let m = Word::from_term(t).mask();
            pairs.iter().any(|u| u != *t && brute_aliased(&brute2, m, Word::from_term(u).mask()))
        })
        .count();
    c.require(pairs.len() == 21 && lib == 6 && enumerated == 6, format!("{lib} aliased (enumeration {enumerated})"));

    let elapsed = t0.elapsed();
    c.within(elapsed, secs(1));
    c.finish(format!("{} / 6 of 21, {elapsed:.2?}", rel.display()))
}

fn heredity() -> Check {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let mut detail = Vec::new();
    for (ene, q) in [(10.0, 20usize), (20.0, 50)] {
        let p = solve_heredity_params(ene, q).map_err(|e| e.to_string())?;
        let (mut mains, mut one, mut two, mut violations) = (0.0, 0.0, 0.0, 0usize);
        let n = 100_000u64;
        for i in 0..n {
            let pat = sample_pattern(&p, stream(7, i));
            let (o, t) = pat.interaction_counts();
            mains += pat.active_mains.len() as f64;
            one += o as f64;
            two += t as f64;
            violations += pat.heredity_violations();
        }
        let n = n as f64;
        for (name, got, want) in
            [("mains", mains / n, ene / 2.0), ("one-parent", one / n, ene / 4.0), ("two-parent", two / n, ene / 4.0)]
        {
            c.require((got - want).abs() / want < 0.02, format!("ENE={ene} q={q} {name} {got} vs {want}"));
        }
        c.require(violations == 0, format!("ENE={ene} q={q}: {violations} violations"));
        detail.push(format!("({:.3}, {:.3}, {:.3})", mains / n, one / n, two / n));
    }
    let elapsed = t0.elapsed();
    c.within(elapsed, secs(30));
    c.finish(format!("means {}, {elapsed:.2?}", detail.join(" ")))
}

fn anova_oracle() -> Check {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let designs = random_designs(20240611);
    for (i, (table, order)) in designs.iter().enumerate() {
        if let Err(e) = check_against_oracle(table, *order) {
            c.require(false, format!("design {i}: {e}"));
        }
    }
    let elapsed = t0.elapsed();
    c.within(elapsed, secs(60));
    c.finish(format!("{} designs, {elapsed:.2?}", designs.len()))
}

fn f_tail() -> Check {
    let mut c = Clauses::default();
    let grid = f_grid();
    let mut worst: f64 = 0.0;
    for &(d1, d2, f) in &grid {
        let diff = (f_upper_tail(f, d1, d2).map_err(|e| e.to_string())? - f_tail_oracle(f, d1, d2)).abs();
        worst = worst.max(diff);
        c.require(diff < 1e-9, format!("({d1}, {d2}, {f}): off by {diff:e}"));
    }
    let p = f_upper_tail(19.353, 2.0, 72.0).map_err(|e| e.to_string())?;
    c.require(format!("{p:.2e}") == "1.88e-7", format!("p = {p:e}"));
    c.finish(format!("{} points, max abs error {worst:.1e}, p = {p:.3e}", grid.len()))
}

fn sl_study() -> Check {
    let mut c = Clauses::default();
    let t0 = Instant::now();
    let opts = RunOptions::workers(4);
    let seeds = 1..=10u64;
    let (mut largest, mut lasso_ahead, mut both, mut beta_pos, mut sigma_neg) = (0, 0, 0, 0, 0);
    let mut tops = Vec::new();
    for seed in seeds.clone() {
        let r = casestudy_sl(seed, SlScale::Desk, &opts).map_err(|e| format!("seed {seed}: {e}"))?;
        let model = r.effect("model").unwrap_or(f64::NAN);
        let is_largest = r.is_largest("model");
        // model levels are (ridge, lasso); a positive effect favours lasso
        let means = r.level_means("model").map_err(|e| e.to_string())?;
        let ahead =
            means.iter().find(|m| m.0 == "lasso").map(|m| m.1) > means.iter().find(|m| m.0 == "ridge").map(|m| m.1);
        largest += is_largest as usize;
        lasso_ahead += ahead as usize;
        both += (is_largest && ahead) as usize;
        beta_pos += (r.effect("beta.mu").unwrap_or(f64::NAN) > 0.0) as usize;
        sigma_neg += (r.effect("sigma").unwrap_or(f64::NAN) < 0.0) as usize;
        if let Some(top) = r.effects.iter().max_by(|a, b| a.value.abs().total_cmp(&b.value.abs())) {
            tops.push(format!("{seed}:{}={:+.2}/model={model:+.2}", top.label, top.value));
        }
    }
    let elapsed = t0.elapsed();
    c.require(both >= 9, format!(
            "model largest with lasso ahead in {both}/10 (largest {largest}, lasso ahead {lasso_ahead}, beta.mu+ {beta_pos}, sigma- {sigma_neg}); top effects {}",
            tops.join(" ")
        ));
    c.require(beta_pos >= 9, format!("beta.mu positive in {beta_pos}/10"));
    c.require(sigma_neg >= 9, format!("sigma negative in {sigma_neg}/10"));
    c.within(elapsed, secs(600));
    c.finish(format!(
        "model largest {largest}/10, lasso ahead {lasso_ahead}/10, beta.mu+ {beta_pos}/10, sigma- {sigma_neg}/10, {elapsed:.1?}"
    ))
}

fn determinism() -> Check {
    let mut c = Clauses::default();
    let reg = Registry::builtin();
    let demo = StudyPlan::new(
        full_factorial(vec![
            Factor::numeric("a", &[1.0, 2.0, 3.0]).unwrap(),
            Factor::categorical("b", &["lo", "hi"]).unwrap(),
        ])
        .map_err(|e| e.to_string())?,
        "demo",
        5,
        4242,
    );
    let sl = sl_plan(SlScale::Desk, 11).map_err(|e| e.to_string())?;
    for (name, plan) in [("demo", &demo), ("sl", &sl)] {
        let csv = |w: usize| {
            run_study(plan, &reg, &RunOptions::workers(w)).map(|o| table_to_string(&o.table)).map_err(|e| e.to_string())
        };
        let one = csv(1)?;
        for w in [2, 8] {
            c.require(csv(w)? == one, format!("{name}: {w} workers differ from 1"));
        }
    }
    c.finish("demo and learning studies byte-identical at 1, 2, 8 workers".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("KMM full table", kmm_full),
        ("KMM table without AN", kmm_no_an_stage),
        ("KMM 72-run table", kmm_cheapo),
        ("AN type I error diagnosis", an_diagnosis),
        ("TRPD ranking", trpd_ranking),
        ("design algebra", design_algebra),
        ("heredity Monte Carlo", heredity),
        ("ANOVA least-squares oracle", anova_oracle),
        ("F upper tail", f_tail),
        ("learning study effects", sl_study),
        ("worker-count determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t0.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{elapsed:.2?}] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{elapsed:.2?}] {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
