//! Counter-based splittable random streams.
//!
//! Every draw is a pure function of a 64-bit key derived from the global
//! seed and a path of words (command id, replicate index, node address
//! digits...). Two runs that derive the same key sequence produce identical
//! draws regardless of evaluation order or thread count.
//!
//! The derivation is fixed and documented so that third parties can
//! reproduce the streams: with `mix` the SplitMix64 finalizer
//! (`z ^= z>>30; z *= 0xbf58476d1ce4e5b9; z ^= z>>27; z *= 0x94d049bb133111eb; z ^= z>>31`)
//! and `GOLDEN = 0x9e3779b97f4a7c15`,
//!
//! * `Key::new(seed)`       has state `mix(seed ^ GOLDEN)`,
//! * `key.child(w)`         has state `mix(state ^ mix(w.wrapping_add(GOLDEN)))`,
//! * `key.rng()`            iterates SplitMix64 from the key state:
//!   `state += GOLDEN; output = mix(state)`.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// A point in the stream tree; cheap to copy and split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key(u64);

impl Key {
    pub fn new(seed: u64) -> Key {
        Key(mix(seed ^ GOLDEN))
    }

    /// Derive the child key for word `w` (replicate index, node digit, ...).
    #[inline]
    pub fn child(self, w: u64) -> Key {
        Key(mix(self.0 ^ mix(w.wrapping_add(GOLDEN))))
    }

    /// Start drawing from this key.
    #[inline]
    pub fn rng(self) -> Rng {
        Rng { state: self.0 }
    }

    pub fn state(self) -> u64 {
        self.0
    }
}

/// SplitMix64 generator seeded by a [`Key`].
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `{0, ..., n-1}`.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.next_f64() * n as f64) as usize;
        i.min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_order_free() {
        let a = Key::new(7).child(1).child(2);
        let b = Key::new(7).child(1).child(2);
        assert_eq!(a, b);
        assert_ne!(a, Key::new(7).child(2).child(1));
    }

    #[test]
    fn rng_streams_differ_by_key() {
        let mut r1 = Key::new(7).child(0).rng();
        let mut r2 = Key::new(7).child(1).rng();
        let same = (0..8).all(|_| r1.next_u64() == r2.next_u64());
        assert!(!same);
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut r = Key::new(99).rng();
        for _ in 0..1000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }
}
