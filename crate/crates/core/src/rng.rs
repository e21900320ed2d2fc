//! Counter-based random streams.
//!
//! Every random draw is addressed by `(seed, trial, domain, t, index)` and
//! hashed into a fresh ChaCha8 seed. Results therefore never depend on the
//! order in which trials are scheduled, so serial and parallel runs agree
//! bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Disjoint counter domains. Streams in different domains never collide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    /// Initial batch at t = 0.
    Init = 1,
    /// The single shared sample xi_t of a recursive step.
    Sample = 2,
    /// Batch samples drawn on a reset step.
    Batch = 3,
    /// Reset coin b_t.
    Reset = 4,
    /// Fresh subgradient randomness zeta_t (constrained method).
    Zeta = 5,
    /// Problem or path construction.
    Setup = 6,
    /// Anything else a harness needs.
    Aux = 7,
}

/// splitmix64 finaliser.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one independent trial under a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    /// Same seed, different trial.
    pub fn with_trial(&self, trial: u64) -> Self {
        Self { seed: self.seed, trial }
    }

    /// Derives a sub-key, e.g. one per sweep point, keeping trials separate.
    pub fn fork(&self, label: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x51ed_270b))),
            trial: self.trial,
        }
    }

    /// 64-bit counter hash of the full address.
    pub fn counter(&self, domain: Domain, t: u64, index: u64) -> u64 {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ self.trial);
        h = splitmix64(h ^ domain as u64);
        h = splitmix64(h ^ t);
        splitmix64(h ^ index)
    }

    /// A generator positioned at the given address.
    pub fn rng(&self, domain: Domain, t: u64, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.counter(domain, t, index))
    }

    /// A uniform draw in [0, 1) at the given address.
    pub fn uniform(&self, domain: Domain, t: u64, index: u64) -> f64 {
        // 53 high bits give an exactly representable dyadic rational.
        (self.counter(domain, t, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
