//! Stable seed derivation. Every random stream in the crate is a ChaCha8
//! generator seeded from a SHA-256 digest of its identifying parts, so results
//! do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Incremental builder for a derived 64-bit seed.
#[derive(Clone, Default)]
pub struct SeedBuilder(Sha256);

impl SeedBuilder {
    pub fn new(domain: &str) -> Self {
        let mut h = Sha256::new();
        h.update((domain.len() as u64).to_le_bytes());
        h.update(domain.as_bytes());
        Self(h)
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn str(mut self, s: &str) -> Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub fn finish(self) -> u64 {
        let digest = self.0.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Per-trial seed from the experiment master seed.
pub fn trial_seed(master_seed: u64, trial_index: usize) -> u64 {
    SeedBuilder::new("trial")
        .u64(master_seed)
        .u64(trial_index as u64)
        .finish()
}

/// Per-cell selection seed from a trial seed.
pub fn method_seed(trial_seed: u64, method_tag: &str, n: usize) -> u64 {
    SeedBuilder::new("method")
        .u64(trial_seed)
        .str(method_tag)
        .u64(n as u64)
        .finish()
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
