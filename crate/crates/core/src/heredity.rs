//! Effect-heredity activity prior.
//!
//! Main effects are active independently with probability `pi`. A two-factor
//! interaction is active with probability 0, `c1·pi` or `c2·pi` when none,
//! one or both of its parents are active. Parameters are solved so that the
//! expected active effects split 50/25/25 between main effects, one-parent
//! interactions and two-parent interactions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeredityParams {
    pub q: usize,
    pub ene: f64,
    pub pi: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCounts {
    pub mains: f64,
    pub one_parent: f64,
    pub two_parent: f64,
}

impl ExpectedCounts {
    pub fn total(&self) -> f64 {
        self.mains + self.one_parent + self.two_parent
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InfeasibleParams(format!("{name} = {p} is not a probability")))
    }
}

impl HeredityParams {
    /// Hand-set parameters; ENE is computed from them.
    pub fn new(q: usize, pi: f64, c1: f64, c2: f64) -> Result<Self> {
        let mut p = HeredityParams { q, ene: 0.0, pi, c1, c2 };
        p.validate()?;
        p.ene = expected_counts(&p).total();
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InfeasibleParams(format!("q = {} must be at least 2", self.q)));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::InfeasibleParams("c1 and c2 must be nonnegative".into()));
        }
        check_probability("pi", self.pi)?;
        check_probability("c1*pi", self.c1 * self.pi)?;
        check_probability("c2*pi", self.c2 * self.pi)
    }

    pub fn p_one_parent(&self) -> f64 {
        self.c1 * self.pi
    }

    pub fn p_two_parent(&self) -> f64 {
        self.c2 * self.pi
    }
}

/// Solve `(pi, c1, c2)` from the expected number of active effects.
pub fn solve_heredity_params(ene: f64, q: usize) -> Result<HeredityParams> {
    if q < 2 {
        return Err(Error::InfeasibleParams(format!("q = {q} must be at least 2")));
    }
    let qf = q as f64;
    if !(ene > 0.0 && ene < 2.0 * qf) {
        return Err(Error::InfeasibleParams(format!("ENE = {ene} must lie in (0, {})", 2 * q)));
    }
    let pi = ene / (2.0 * qf);
    let pairs = qf * (qf - 1.0);
    let c1 = ene / (4.0 * pi * pi * (1.0 - pi) * pairs);
    let c2 = ene / (2.0 * pi.powi(3) * pairs);
    let p = HeredityParams { q, ene, pi, c1, c2 };
    p.validate()?;
    Ok(p)
}

/// `(pi·q, c1·pi²(1−pi)·q(q−1), c2·pi³·q(q−1)/2)`
pub fn expected_counts(p: &HeredityParams) -> ExpectedCounts {
    let q = p.q as f64;
    let pairs = q * (q - 1.0);
    ExpectedCounts {
        mains: p.pi * q,
        one_parent: p.c1 * p.pi * p.pi * (1.0 - p.pi) * pairs,
        two_parent: p.c2 * p.pi.powi(3) * pairs / 2.0,
    }
}

/// Expected active effects given `f` active main effects.
pub fn conditional_expected_total(p: &HeredityParams, f: usize) -> f64 {
    let (f, q) = (f as f64, p.q as f64);
    f + f * (q - f) * p.c1 * p.pi + f * (f - 1.0) / 2.0 * p.c2 * p.pi
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPattern {
    pub q: usize,
    /// Sorted indices of active main effects.
    pub active_mains: Vec<usize>,
    /// Active pairs `(i, j)` with `i < j`, in canonical order.
    pub active_interactions: Vec<(usize, usize)>,
}

impl ActivityPattern {
    pub fn is_main_active(&self, i: usize) -> bool {
        self.active_mains.binary_search(&i).is_ok()
    }

    /// Interactions whose parents are both inactive.
    pub fn heredity_violations(&self) -> usize {
        self.active_interactions.iter().filter(|&&(i, j)| !self.is_main_active(i) && !self.is_main_active(j)).count()
    }

    /// Counts split by number of active parents: (one parent, two parents).
    pub fn interaction_counts(&self) -> (usize, usize) {
        self.active_interactions.iter().fold((0, 0), |(one, two), &(i, j)| {
            match (self.is_main_active(i), self.is_main_active(j)) {
                (true, true) => (one, two + 1),
                (false, false) => (one, two),
                _ => (one + 1, two),
            }
        })
    }

    pub fn n_active(&self) -> usize {
        self.active_mains.len() + self.active_interactions.len()
    }
}

/// Index of pair `(i, j)`, `i < j`, in canonical (row-major upper triangle)
/// order.
pub fn pair_index(q: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < q);
    i * (2 * q - i - 1) / 2 + (j - i - 1)
}

/// Draw a pattern. Uniform `k` of the counter stream decides main effect `k`
/// for `k < q` and pair `q + pair_index(i, j)` otherwise.
pub fn sample_pattern(p: &HeredityParams, seed: u64) -> ActivityPattern {
    let q = p.q;
    let active: Vec<bool> = (0..q).map(|k| seed::uniform(seed, k as u64) < p.pi).collect();
    let (p1, p2) = (p.p_one_parent(), p.p_two_parent());
    let mut inter = Vec::new();
    for i in 0..q {
        for j in i + 1..q {
            let prob = match (active[i], active[j]) {
                (false, false) => continue,
                (true, true) => p2,
                _ => p1,
            };
            let u = seed::uniform(seed, (q + pair_index(q, i, j)) as u64);
            if u < prob {
                inter.push((i, j));
            }
        }
    }
    ActivityPattern { q, active_mains: (0..q).filter(|&k| active[k]).collect(), active_interactions: inter }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_solution() {
        let p = solve_heredity_params(10.0, 20).unwrap();
        assert!((p.pi - 0.25).abs() < 1e-15);
        // 10 / (4 · 0.0625 · 0.75 · 380) and 10 / (2 · 0.015625 · 380)
        assert!((p.c1 - 0.140_350_877_192_982_46).abs() < 1e-12);
        assert!((p.c2 - 0.842_105_263_157_894_7).abs() < 1e-12);
    }

    #[test]
    fn solved_params_split_50_25_25() {
        for &(ene, q) in &[(10.0, 20), (20.0, 50), (20.0, 20), (10.0, 50), (5.0, 10), (10.0, 10)] {
            let p = solve_heredity_params(ene, q).unwrap();
            let c = expected_counts(&p);
            assert!((c.mains / (ene / 2.0) - 1.0).abs() < 1e-10);
            assert!((c.one_parent / (ene / 4.0) - 1.0).abs() < 1e-10);
            assert!((c.two_parent / (ene / 4.0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn infeasible_inputs() {
        assert!(matches!(solve_heredity_params(40.0, 20), Err(Error::InfeasibleParams(_))));
        assert!(matches!(solve_heredity_params(0.0, 20), Err(Error::InfeasibleParams(_))));
        // c2·pi = 2q / (ENE (q − 1)) exceeds 1 for small ENE
        assert!(matches!(solve_heredity_params(1.0, 20), Err(Error::InfeasibleParams(_))));
        assert!(solve_heredity_params(1.0, 1).is_err());
    }

    #[test]
    fn pi_shrinks_with_ene() {
        let pis: Vec<f64> = [20.0, 10.0, 5.0, 2.5].iter().map(|&e| solve_heredity_params(e, 20).unwrap().pi).collect();
        assert!(pis.windows(2).all(|w| w[1] < w[0]));
        assert!((pis[3] - 2.5 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn zero_pi_gives_nothing() {
        let p = HeredityParams::new(10, 0.0, 0.5, 1.0).unwrap();
        let c = expected_counts(&p);
        assert_eq!((c.mains, c.one_parent, c.two_parent), (0.0, 0.0, 0.0));
        let pat = sample_pattern(&p, 3);
        assert_eq!(pat.n_active(), 0);
    }

    #[test]
    fn certain_activity() {
        let p = HeredityParams::new(6, 1.0, 0.0, 1.0).unwrap();
        let pat = sample_pattern(&p, 99);
        assert_eq!(pat.active_mains.len(), 6);
        assert_eq!(pat.active_interactions.len(), 15);
    }

    #[test]
    fn hand_set_expectations() {
        let p = HeredityParams::new(10, 0.3, 0.5, 1.0).unwrap();
        let c = expected_counts(&p);
        assert!((c.mains - 3.0).abs() < 1e-12);
        assert!((c.one_parent - 0.5 * 0.09 * 0.7 * 90.0).abs() < 1e-12);
        assert!((c.two_parent - 0.027 * 45.0).abs() < 1e-12);
        assert!(HeredityParams::new(10, 0.5, 3.0, 1.0).is_err());
    }

    #[test]
    fn pair_indices_are_canonical() {
        let q = 5;
        let mut k = 0;
        for i in 0..q {
            for j in i + 1..q {
                assert_eq!(pair_index(q, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = solve_heredity_params(10.0, 20).unwrap();
        assert_eq!(sample_pattern(&p, 5), sample_pattern(&p, 5));
    }
}
