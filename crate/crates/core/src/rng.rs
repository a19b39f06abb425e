//! Seeded random streams.
//!
//! A [`RandomStream`] is ChaCha8 keyed through `SeedableRng::seed_from_u64`
//! (rand_core's PCG32 key expansion). Bernoulli draws compare one 64-bit
//! output against `p * 2^64` (rand's `Bernoulli`); bounded integers use
//! rand's `u32` range sampling. Both are platform independent, so a seed
//! fixes every output bit for bit.
//!
//! Corpus-level operations give every `(line, word)` its own stream, keyed by
//! [`derive_seed`], so results do not depend on how lines are scheduled.

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for word `word` of line `line` under `base_seed`.
    pub fn for_word(base_seed: u64, line: u64, word: u64) -> Self {
        Self::from_seed(derive_seed(base_seed, line, word))
    }

    /// `true` with probability `p`; `p` is clamped to `[0, 1]`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        let dist = Bernoulli::new(p.clamp(0.0, 1.0)).expect("clamped probability");
        dist.sample(&mut self.rng)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u32) -> u32 {
        assert!(n > 0, "empty range");
        self.rng.random_range(0..n)
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// `mix64(mix64(mix64(base + φ) ^ (line + φ)) ^ (word + φ))` with wrapping
/// adds and φ the 64-bit golden-ratio constant.
pub fn derive_seed(base_seed: u64, line: u64, word: u64) -> u64 {
    let h = mix64(base_seed.wrapping_add(GOLDEN));
    let h = mix64(h ^ line.wrapping_add(GOLDEN));
    mix64(h ^ word.wrapping_add(GOLDEN))
}

/// Base seed of estimator pass `pass`; pass 0 keeps `base_seed` itself.
pub fn pass_seed(base_seed: u64, pass: u64) -> u64 {
    if pass == 0 {
        base_seed
    } else {
        mix64(base_seed ^ mix64(pass.wrapping_mul(GOLDEN)))
    }
}
