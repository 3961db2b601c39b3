//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the base seed plus an ordered list
//! of `(name, value)` labels, hashed with SHA-256. The encoding is fixed-width
//! little-endian, so derived seeds are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"mmshare/derive_seed/v1";

/// Derive a child seed from `base` and an ordered label list.
pub fn derive_seed(base: u64, labels: &[(&str, u64)]) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(base.to_le_bytes());
    h.update((labels.len() as u64).to_le_bytes());
    for (name, value) in labels {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update(value.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// The random stream type used throughout the simulator.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream keyed by `base` and `labels`.
pub fn derived_stream(base: u64, labels: &[(&str, u64)]) -> Stream {
    stream(derive_seed(base, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_inputs_same_output() {
        assert_eq!(derive_seed(42, &[("rep", 3)]), derive_seed(42, &[("rep", 3)]));
    }

    #[test]
    fn label_order_matters() {
        assert_ne!(derive_seed(1, &[("a", 1), ("b", 2)]), derive_seed(1, &[("b", 2), ("a", 1)]));
    }

    #[test]
    fn label_boundaries_are_unambiguous() {
        assert_ne!(derive_seed(1, &[("ab", 1)]), derive_seed(1, &[("a", 1)]));
        assert_ne!(derive_seed(1, &[]), derive_seed(1, &[("", 0)]));
    }

    #[test]
    fn stable_across_builds() {
        // frozen reference value: guards the wire encoding of labels
        let first = derive_seed(0, &[("rep", 0)]);
        assert_eq!(first, derive_seed(0, &[("rep", 0)]));
        let digest = {
            let mut h = Sha256::new();
            h.update(DOMAIN);
            h.update(0u64.to_le_bytes());
            h.update(1u64.to_le_bytes());
            h.update(3u64.to_le_bytes());
            h.update(b"rep");
            h.update(0u64.to_le_bytes());
            h.finalize()
        };
        assert_eq!(first, u64::from_le_bytes(digest[..8].try_into().unwrap()));
    }

    #[test]
    fn no_collisions_over_a_million_repetitions() {
        let mut seen = HashSet::with_capacity(1 << 21);
        for rep in 0..1_000_000u64 {
            assert!(seen.insert(derive_seed(42, &[("rep", rep)])), "collision at {rep}");
        }
    }
}
