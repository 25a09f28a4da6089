//! Counter-based seed derivation (SplitMix64 finalizer).
//!
//! Every derived value is a pure function of its inputs, so results do not
//! depend on which worker computes them or in what order.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `counter`-th output of a SplitMix64 stream started at `seed`.
pub fn stream(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform in [0, 1) with 53 random bits.
pub fn uniform(seed: u64, counter: u64) -> f64 {
    (stream(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed for one (run, replicate) cell of a study.
pub fn run_seed(master: u64, run: usize, replicate: u32) -> u64 {
    let per_run = stream(mix64(master), run as u64);
    stream(per_run, u64::from(replicate))
}

/// Independent sub-seed for a named purpose within one run.
pub fn substream(seed: u64, purpose: u64) -> u64 {
    stream(seed ^ 0xD1B5_4A32_D192_ED03, purpose)
}
