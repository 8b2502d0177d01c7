//! Counter-based SplitMix64 streams.
//!
//! Output `i` of a stream with key `k` is `mix(k + i * GAMMA)`, where `mix` is
//! the SplitMix64 finalizer (Stafford's variant 13). A stream is addressed by
//! `(seed, index)` alone, so every Monte Carlo run draws the same numbers no
//! matter which thread evaluates it or in what order.

use rand_core::{impls, RngCore};

/// Golden-ratio increment, `floor(2^64 / phi)`, made odd.
pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;
/// Separates the key derivation from the output sequence.
const KEY_DOMAIN: u64 = 0xD1B5_4A32_D192_ED03;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// The stream for run `index` of an experiment seeded with `seed`.
    pub fn for_run(seed: u64, index: u64) -> Self {
        let key = mix64(seed ^ mix64(index.wrapping_mul(GAMMA) ^ KEY_DOMAIN));
        CounterRng { key, counter: 0 }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
