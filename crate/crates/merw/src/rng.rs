//! Deterministic counter-based randomness.
//!
//! Every trial owns a splitmix64 stream whose seed is a pure function of
//! `(master_seed, trial_index)`, so results never depend on thread count or
//! scheduling. The generator is counter-based: the state advances by a fixed
//! odd constant and each output is a finalizer of the counter, which also
//! gives closed-form random access (`trial_seed`, `indexed_u64`).

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Fast 64-bit finalizer (the splitmix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// splitmix64 pseudo-random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed of trial `trial_index` in a campaign: output number `trial_index` of
/// the splitmix64 stream seeded with `master_seed`, evaluated in closed form.
#[inline]
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Stateless random access into the stream owned by `seed`: the value at
/// position `index`. Query order is irrelevant, which is what makes lazily
/// generated environments reproducible.
#[inline]
pub fn indexed_u64(seed: u64, index: i64) -> u64 {
    mix64(mix64(seed).wrapping_add((index as u64).wrapping_mul(GAMMA)))
}

/// `indexed_u64` mapped to `[0, 1)`.
#[inline]
pub fn indexed_unit_f64(seed: u64, index: i64) -> f64 {
    (indexed_u64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
