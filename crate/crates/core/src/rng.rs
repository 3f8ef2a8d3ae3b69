//! Counter-based deterministic random numbers.
//!
//! Every draw is a pure function of `(key, counter)`:
//!
//! ```text
//! z   = key + (counter + 1) * 0x9E3779B97F4A7C15      (wrapping)
//! z   = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z   = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! which is the SplitMix64 output function evaluated at an explicit position.
//! No library default generator is involved, so noise and shuffles are
//! identical across platforms and releases. Because the finalizer is a
//! bijection on `u64` and the golden-ratio increment is odd, [`derive_seed`]
//! never maps two indices of the same parent seed to the same child seed.

/// Golden-ratio increment used by SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer (a bijection on `u64`).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Child seed for item `index` of a parent seed.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Random access generator: `at(i)` is the i-th output of the stream keyed by `key`.
///
/// The sequential methods (`next_u64`, `next_f64`, ...) advance an internal
/// counter and are equivalent to calling `at(0)`, `at(1)`, ...
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn at(&self, counter: u64) -> u64 {
        derive_seed(self.key, counter)
    }

    /// Uniform real in the half-open interval `(0, 1]` at position `counter`.
    ///
    /// The interval excludes 0 so that `r > 0` and `r <= 1` always hold, making
    /// rate-0 and rate-1 noise exact identities/complements.
    #[inline]
    pub fn unit_at(&self, counter: u64) -> f64 {
        ((self.at(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` at position `counter` (`bound > 0`).
    ///
    /// Widening multiply; the bias is below `bound / 2^64`.
    #[inline]
    pub fn below_at(&self, counter: u64, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.at(counter) as u128 * bound as u128) >> 64) as u64
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_unit(&mut self) -> f64 {
        let v = self.unit_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_below(&mut self, bound: u64) -> u64 {
        let v = self.below_at(self.counter, bound);
        self.counter += 1;
        v
    }

    /// Uniform real in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        // unit is in (0, 1]; 1 - unit is in [0, 1)
        lo + (hi - lo) * (1.0 - self.next_unit())
    }

    /// Standard normal deviate via Box-Muller (consumes two positions).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
