//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a
//! [`Seed`]. Seeds are derived hierarchically: a parent seed is mixed with a
//! label or an index through the SplitMix64 finalizer, so the stream for
//! `(master, dataset, ratio, repetition, fold, member)` is a pure function of
//! those coordinates and never of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// FNV-1a; labels are short ASCII tags and dataset names.
fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(u64);

impl Seed {
    pub const fn new(value: u64) -> Self {
        Seed(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Child seed for an integer coordinate.
    pub fn derive(self, index: u64) -> Seed {
        Seed(splitmix(
            self.0.wrapping_add(GOLDEN) ^ splitmix(index.wrapping_add(GOLDEN)),
        ))
    }

    /// Child seed for a textual coordinate (dataset name, method, tag).
    pub fn derive_str(self, label: &str) -> Seed {
        self.derive(hash_str(label))
    }

    /// Child seed for a real coordinate such as a missingness ratio.
    pub fn derive_f64(self, value: f64) -> Seed {
        // -0.0 and 0.0 must map to the same stream
        let v = if value == 0.0 { 0.0 } else { value };
        self.derive(v.to_bits())
    }

    pub fn stream(self) -> Stream {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}
