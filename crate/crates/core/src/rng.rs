//! Keyed deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose 32-byte seed is
//!
//! ```text
//! SHA-256( domain || 0x00 || seed:u64-le || len(key):u64-le || key || index:u32-le )
//! ```
//!
//! `domain` separates consumers (view protocol, scripted generator, held-out
//! split), `key` is normally the sample's source id and `index` the 1-based
//! view index. Uniform reals are drawn from the top 53 bits of `next_u64`, so
//! the derived values depend only on the ChaCha8 keystream and stay stable
//! across `rand` releases.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const VIEW_DOMAIN: &str = "grc/view-protocol/v1";
pub const SCRIPTED_DOMAIN: &str = "grc/scripted-generator/v1";
pub const SYNTH_DOMAIN: &str = "grc/synth-corpus/v1";

pub struct KeyedRng(ChaCha8Rng);

impl KeyedRng {
    pub fn new(domain: &str, seed: u64, key: &str, index: u32) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(domain.as_bytes());
        hasher.update([0u8]);
        hasher.update(seed.to_le_bytes());
        hasher.update((key.len() as u64).to_le_bytes());
        hasher.update(key.as_bytes());
        hasher.update(index.to_le_bytes());
        Self(ChaCha8Rng::from_seed(hasher.finalize().into()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (up to rounding at the top end).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    /// True with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Fraction in `[0, 1)` derived from a string alone, for hash-based splits.
pub fn hash_fraction(key: &str) -> f64 {
    let digest = Sha256::digest(key.as_bytes());
    let head = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    (head >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
