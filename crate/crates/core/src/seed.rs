//! Deterministic seed derivation.
//!
//! A child seed is `splitmix64(parent ^ fnv1a64(label))`, and numeric path
//! components are folded in one at a time with `splitmix64(acc ^ splitmix64(k))`.
//! Both steps are documented so that seeds recorded in run summaries can be
//! reproduced outside this crate.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// The SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Named sub-seed of `parent`.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a64(label.as_bytes()))
}

/// Sub-seed of `parent` along a numeric path such as `(round, client)`.
pub fn derive_indexed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // First SplitMix64 output for state 0 is the published test vector.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(fnv1a64(b""), FNV_OFFSET);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn labels_and_paths_separate() {
        assert_ne!(derive_seed(1, "init"), derive_seed(1, "partition"));
        assert_ne!(derive_seed(1, "init"), derive_seed(2, "init"));
        assert_ne!(derive_indexed(5, &[1, 2]), derive_indexed(5, &[2, 1]));
        assert_eq!(derive_indexed(5, &[3, 4]), derive_indexed(5, &[3, 4]));
    }
}
