//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is the
//! concatenation of `(master seed, path, step, domain tag)` as little-endian
//! `u64` words, so distinct tuples can never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the uses of one `(master, path, step)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 1,
    Validation = 2,
    Test = 3,
}

pub fn stream(master: u64, path: u64, step: u64, domain: Domain) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&path.to_le_bytes());
    key[16..24].copy_from_slice(&step.to_le_bytes());
    key[24..32].copy_from_slice(&(domain as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn output_is_version_pinned() {
        let mut r = stream(42, 7, 3, Domain::Noise);
        let words: Vec<u64> = (0..3).map(|_| r.random::<u64>()).collect();
        let g: f64 = r.sample(StandardNormal);
        assert_eq!(words, PINNED_WORDS, "generator output changed");
        assert_eq!(g.to_bits(), PINNED_NORMAL_BITS, "normal sampler output changed: {g}");
    }

    const PINNED_WORDS: [u64; 3] = [632534131931930102, 8699005557843988156, 11039005160512635078];
    const PINNED_NORMAL_BITS: u64 = 0xbfec_c50e_1c4b_c469;

    #[test]
    fn distinct_tuples_give_distinct_streams() {
        let a: u64 = stream(1, 2, 3, Domain::Noise).random();
        let b: u64 = stream(1, 3, 2, Domain::Noise).random();
        let c: u64 = stream(1, 2, 3, Domain::Validation).random();
        assert!(a != b && a != c && b != c);
        let again: u64 = stream(1, 2, 3, Domain::Noise).random();
        assert_eq!(a, again);
    }
}
