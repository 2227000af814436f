//! Reproducible random streams.
//!
//! An [`RngStream`] is a `(seed, stream_id)` pair. Drawing from it yields a
//! ChaCha8 generator keyed by `seed` and positioned on ChaCha stream
//! `stream_id`, so two streams with different ids never overlap. Child streams
//! are derived by hashing, which keeps per-split and per-repetition randomness
//! independent of the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// Labels for the fixed sub-streams used by the test procedures.
pub mod label {
    pub const SPLITS: u64 = 0x5350_4c49_5453;
    pub const FITS: u64 = 0x4649_5453;
    pub const DATA: u64 = 0x4441_5441;
    pub const METHOD: u64 = 0x4d45_5448;
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Child stream identified by `label`. Pure: the parent is not advanced.
    pub fn derive(&self, label: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        RngStream {
            seed: self.seed,
            stream_id: id,
        }
    }

    /// Child stream keyed by a string label (FNV-1a hashed).
    pub fn derive_str(&self, label: &str) -> RngStream {
        self.derive(fnv1a64(label.as_bytes()))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
