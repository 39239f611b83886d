//! Seed handling. One run seed drives several decorrelated generators
//! (environment, behavior policy) via a counter-keyed derivation, so runs are
//! independent yet replayable from a single integer.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream index for the environment's generator (spawns, demeanors).
pub const STREAM_ENV: u64 = 0;
/// Stream index for the behavior policy's generator (exploration, ties).
pub const STREAM_POLICY: u64 = 1;

/// Derives the generator for `(seed, stream)`. Distinct streams from the same
/// seed are decorrelated; the mapping is fixed, so a seed fully determines
/// every draw of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream_rng(7, STREAM_ENV);
        let mut b = stream_rng(7, STREAM_ENV);
        let mut c = stream_rng(7, STREAM_POLICY);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.random()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.random()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }
}
