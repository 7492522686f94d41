//! Seeded random streams with labeled sub-seeding.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic random stream. Same seed gives the same sequence; child
/// streams are derived from `(seed, label)` so that consumers never share state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by this stream's seed and a label. Does not advance `self`.
    pub fn derive(&self, label: &str) -> Self {
        Self::new(derive_seed(self.seed, label))
    }

    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        Self::new(derive_seed(self.seed, &format!("{label}#{index}")))
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Draw an index from a discrete distribution given by (unnormalized-safe) weights.
    pub fn categorical<S: crate::Scalar>(&mut self, probs: &[S]) -> usize {
        let total = probs.iter().fold(S::zero(), |a, &b| a + b);
        let u = S::unit(&mut self.inner) * total;
        let mut acc = S::zero();
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding can leave u == total; fall back to the last positive entry
        probs.iter().rposition(|&p| p > S::zero()).unwrap_or(probs.len() - 1)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
