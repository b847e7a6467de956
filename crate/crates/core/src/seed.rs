//! Per-component seed derivation: every random stream in a run is
//! `derive(global_seed, component_tag)`, so one seed reproduces a whole run.

use sha2::{Digest, Sha256};

/// First 8 bytes (little endian) of SHA-256(seed_le || tag).
pub fn derive(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// FNV-1a over a slice of words, for content-keyed seeds.
pub fn fnv1a(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive(42, "nmf"), derive(42, "nmf"));
        assert_ne!(derive(42, "nmf"), derive(42, "lda"));
        assert_ne!(derive(42, "nmf"), derive(43, "nmf"));
        assert_ne!(fnv1a([1, 2]), fnv1a([2, 1]));
    }
}
