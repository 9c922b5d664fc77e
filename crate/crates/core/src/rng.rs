//! Deterministic pseudo-randomness for the whole crate.
//!
//! Every stochastic choice (subsampling, epoch shuffles, weight
//! initialization, seed derivation) goes through the SplitMix64 generator
//! below, using the published constants from Steele, Lea and Vigna's
//! reference implementation. The point is bit-reproducibility: the same
//! seeds produce the same folds on any platform, and the algorithm is small
//! enough to re-implement exactly in another language.

/// SplitMix64 generator. 64-bit state, one output per step.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, bound)` (Lemire rejection).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut x = self.next_u64();
        let mut m = (x as u128) * (bound as u128);
        let mut lo = m as u64;
        if lo < bound {
            let threshold = bound.wrapping_neg() % bound;
            while lo < threshold {
                x = self.next_u64();
                m = (x as u128) * (bound as u128);
                lo = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

/// Derives a seed from a list of parts by folding each part through a
/// SplitMix64 step. Used for per-fold / per-tensor seed derivation so that
/// adding a new experiment size never perturbs existing folds.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = GOLDEN_GAMMA;
    for &p in parts {
        h = SplitMix64::new(h ^ p).next_u64();
    }
    h
}

/// In-place Fisher-Yates shuffle driven by the given generator.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Samples `n` of `total` indices uniformly without replacement.
///
/// Each index gets a pseudo-random 64-bit key from the seeded stream; the
/// `n` smallest keys win (ties broken by index). The result is returned in
/// ascending index order, so the original ordering of chosen items is
/// preserved.
pub fn sample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    assert!(n <= total, "cannot sample {n} of {total}");
    let mut rng = SplitMix64::new(seed);
    let mut keyed: Vec<(u64, usize)> = (0..total).map(|i| (rng.next_u64(), i)).collect();
    keyed.sort_unstable();
    let mut chosen: Vec<usize> = keyed[..n].iter().map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    chosen
}
