//! Counter-based deterministic randomness.
//!
//! Each random value is a pure function of (seed, trial index, coordinate
//! index, draw counter), so any individual trial can be reproduced in
//! isolation and results are independent of scheduling or parallelism.

/// SplitMix64 finalizer; good avalanche, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct KeyedRng {
    key: u64,
    ctr: u64,
}

impl KeyedRng {
    pub fn new(seed: u64, trial: u64, coordinate: u64) -> Self {
        let key = mix(mix(mix(seed) ^ trial) ^ coordinate.rotate_left(17));
        KeyedRng { key, ctr: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.ctr += 1;
        mix(self.key ^ self.ctr.wrapping_mul(0xd1b5_4a32_d192_ed03))
    }

    /// Uniform draw in `0..bound` by rejection (bound ≤ 2^32 in practice).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}
