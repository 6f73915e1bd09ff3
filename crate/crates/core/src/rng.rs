//! Seed derivation and the crate-wide PRNG choice.
//!
//! Every random decision flows through a [`ChaCha8Rng`] whose counter
//! position can be saved and restored, which is what makes interrupted
//! training resumable bit-for-bit.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer. Decorrelates nearby seed values.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed for a named purpose (`tag`) from a user seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_mul(0xA24B_AED4_963E_E407)))
}

/// Fresh stream for a (seed, tag) pair.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Tags for the fixed sub-streams of a run. Kept in one place so two
/// components can never collide on the same stream by accident.
pub mod tags {
    pub const FACTORS: u64 = 1;
    pub const ENTANGLER: u64 = 2;
    pub const GRID_NOISE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const HELDOUT: u64 = 6;
    pub const EVAL: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derive_seed_is_deterministic_and_tag_sensitive() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
    }

    #[test]
    fn stream_position_roundtrip() {
        let mut a = stream(7, tags::TRAIN);
        for _ in 0..13 {
            a.next_u64();
        }
        let pos = a.get_word_pos();
        let expected: Vec<u64> = (0..5).map(|_| a.next_u64()).collect();

        let mut b = stream(7, tags::TRAIN);
        b.set_word_pos(pos);
        let got: Vec<u64> = (0..5).map(|_| b.next_u64()).collect();
        assert_eq!(expected, got);
    }
}
