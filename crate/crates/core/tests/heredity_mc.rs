use proptest::prelude::*;
use simdoe::heredity::{conditional_expected_total, expected_counts, sample_pattern, solve_heredity_params};
use simdoe::seed::stream;

const SAMPLES: u64 = 100_000;

struct Tally {
    mains: f64,
    one: f64,
    two: f64,
    violations: usize,
    /// (trials, successes) for pairs with exactly one active parent.
    one_parent_pairs: (u64, u64),
    /// Totals grouped by the number of active mains.
    by_f: Vec<(u64, f64)>,
}

fn tally(ene: f64, q: usize, master: u64) -> Tally {
    let p = solve_heredity_params(ene, q).unwrap();
    let mut t =
        Tally { mains: 0.0, one: 0.0, two: 0.0, violations: 0, one_parent_pairs: (0, 0), by_f: vec![(0, 0.0); q + 1] };
    for i in 0..SAMPLES {
        let pat = sample_pattern(&p, stream(master, i));
        let f = pat.active_mains.len();
        let (one, two) = pat.interaction_counts();
        t.mains += f as f64;
        t.one += one as f64;
        t.two += two as f64;
        t.violations += pat.heredity_violations();
        t.one_parent_pairs.0 += (f * (q - f)) as u64;
        t.one_parent_pairs.1 += one as u64;
        t.by_f[f].0 += 1;
        t.by_f[f].1 += pat.n_active() as f64;
    }
    let n = SAMPLES as f64;
    t.mains /= n;
    t.one /= n;
    t.two /= n;
    t
}

fn check_counts(ene: f64, q: usize) {
    let t = tally(ene, q, 7);
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    assert!(rel(t.mains, ene / 2.0) < 0.02, "mains {}", t.mains);
    assert!(rel(t.one, ene / 4.0) < 0.02, "one-parent {}", t.one);
    assert!(rel(t.two, ene / 4.0) < 0.02, "two-parent {}", t.two);
    assert_eq!(t.violations, 0);

    let p = solve_heredity_params(ene, q).unwrap();
    let (trials, hits) = t.one_parent_pairs;
    let rate = hits as f64 / trials as f64;
    let want = p.p_one_parent();
    let se = (want * (1.0 - want) / trials as f64).sqrt();
    assert!((rate - want).abs() < 5.0 * se, "one-parent rate {rate} vs {want}");

    for (f, &(count, total)) in t.by_f.iter().enumerate() {
        if count < 2000 {
            continue;
        }
        let mean = total / count as f64;
        let want = conditional_expected_total(&p, f);
        // interactions given f are binomial sums; this bounds their spread
        let sd = (want - f as f64).max(1.0).sqrt();
        assert!((mean - want).abs() < 5.0 * sd / (count as f64).sqrt(), "f = {f}: {mean} vs {want}");
    }
}

#[test]
fn ene_10_q_20_monte_carlo() {
    check_counts(10.0, 20);
}

#[test]
fn ene_20_q_50_monte_carlo() {
    check_counts(20.0, 50);
}

#[test]
fn deterministic_given_seed() {
    let p = solve_heredity_params(10.0, 20).unwrap();
    for s in 0..50 {
        assert_eq!(sample_pattern(&p, s), sample_pattern(&p, s));
    }
}

proptest! {
    #[test]
    fn expected_counts_split_half_quarter_quarter(q in 2usize..80, frac in 0.01f64..0.99) {
        let ene = frac * 2.0 * q as f64;
        match solve_heredity_params(ene, q) {
            Ok(p) => {
                let c = expected_counts(&p);
                prop_assert!((c.total() - ene).abs() < 1e-9 * ene);
                prop_assert!((c.mains - ene / 2.0).abs() < 1e-9 * ene);
                prop_assert!((c.one_parent - ene / 4.0).abs() < 1e-9 * ene);
                prop_assert!((c.two_parent - ene / 4.0).abs() < 1e-9 * ene);
                prop_assert!(p.p_one_parent() <= 1.0 && p.p_two_parent() <= 1.0);
            }
            Err(_) => {
                // only rejected when a conditional probability would exceed 1
                let pi = ene / (2.0 * q as f64);
                let c1 = ene / (4.0 * pi * pi * (1.0 - pi) * (q * (q - 1)) as f64);
                let c2 = ene / (2.0 * pi.powi(3) * (q * (q - 1)) as f64);
                prop_assert!(c1 * pi > 1.0 || c2 * pi > 1.0);
            }
        }
    }

    #[test]
    fn patterns_respect_heredity(q in 2usize..40, frac in 0.5f64..0.95, seed in any::<u64>()) {
        let ene = frac * 2.0 * q as f64;
        if let Ok(p) = solve_heredity_params(ene, q) {
            let pat = sample_pattern(&p, seed);
            prop_assert_eq!(pat.heredity_violations(), 0);
            for &(i, j) in &pat.active_interactions {
                prop_assert!(i < j && j < q);
            }
        }
    }
}
