//! Portable, seedable randomness.
//!
//! Every random decision in the lab (coin flips in team-draft, A/B arm
//! assignment, query sampling, simulated clicks, synthetic corpora) draws
//! from [`SplitMix64`], so two implementations that follow the definitions
//! below agree bit-for-bit:
//!
//! ```text
//! next():  state += 0x9E3779B97F4A7C15
//!          z = state
//!          z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          return z ^ (z >> 31)                      (all arithmetic mod 2^64)
//! uniform: (next() >> 11) * 2^-53                    in [0, 1)
//! ```
//!
//! Seeds for derived streams are produced by [`mix_seed`], and per-session
//! seeds by [`session_seed`] which hashes the session id with 64-bit FNV-1a.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        finalize(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p` (clamped to `[0, 1]`).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Unbiased integer in `[0, bound)` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() needs a positive bound");
        let mut m = (self.next_u64() as u128) * (bound as u128);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
            }
        }
        (m >> 64) as u64
    }

    /// Index in `[lo, hi]` inclusive.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    /// Fisher-Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.below(items.len() as u64) as usize])
        }
    }
}

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over the UTF-8 bytes of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Combine a parent seed with a discriminator into a child seed:
/// the first output of `SplitMix64(parent ^ finalize(discriminator))`.
pub fn mix_seed(parent: u64, discriminator: u64) -> u64 {
    SplitMix64::new(parent ^ finalize(discriminator)).next_u64()
}

/// Seed for one lab session: `mix_seed(experiment_seed, fnv1a64(session_id))`.
pub fn session_seed(experiment_seed: u64, session_id: &str) -> u64 {
    mix_seed(experiment_seed, fnv1a64(session_id))
}

/// Seed for the `index`-th draw of a named stream under `master`.
pub fn stream_seed(master: u64, stream: &str, index: u64) -> u64 {
    mix_seed(mix_seed(master, fnv1a64(stream)), index)
}
