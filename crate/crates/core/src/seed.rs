//! Seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent seed from a parent seed and a salt string.
pub fn derive(seed: u64, salt: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(salt.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Derives a seed from a parent seed and an integer index.
pub fn derive_indexed(seed: u64, salt: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(salt.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maps a hash of `(seed, key)` to a float in `[0, 1)`.
pub fn unit_hash(seed: u64, key: &str) -> f64 {
    let bits = derive(seed, key) >> 11;
    bits as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salts_separate_streams() {
        assert_ne!(derive(1, "split"), derive(1, "select"));
        assert_eq!(derive(1, "split"), derive(1, "split"));
        assert_ne!(derive_indexed(1, "b", 0), derive_indexed(1, "b", 1));
    }

    #[test]
    fn unit_hash_in_range() {
        for i in 0..1000 {
            let u = unit_hash(7, &format!("ex-{i}"));
            assert!((0.0..1.0).contains(&u));
        }
    }
}
