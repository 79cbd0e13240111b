//! Seeded randomness with named substreams.
//!
//! Every consumer of randomness (sensor noise, attack selection, formation
//! placement, election timers) draws from its own ChaCha stream whose seed is
//! derived from the trial seed and a path of labels. Changing how many draws
//! one consumer makes never shifts another consumer's sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;

pub type SimRng = ChaCha12Rng;

/// Labels for the independent substreams used by the simulator.
pub mod stream {
    pub const FORMATION: u64 = 0x464f_524d;
    pub const VELOCITY: u64 = 0x5645_4c4f;
    pub const GNSS: u64 = 0x474e_5353;
    pub const INS: u64 = 0x494e_5300;
    pub const RANGE: u64 = 0x5241_4e47;
    pub const ATTACK_SELECT: u64 = 0x5345_4c45;
    pub const SPOOF: u64 = 0x5350_4f46;
    pub const RAFT: u64 = 0x5241_4654;
    pub const CALIBRATION: u64 = 0x4341_4c49;
    pub const TRIAL: u64 = 0x5452_4941;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Child seed for `label`. SplitMix64 finalizer over the combined word.
    pub fn derive(self, label: u64) -> Seed {
        let mut z = self
            .0
            .wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x6A09_E667_F3BC_C909);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }

    pub fn derive_path(self, labels: &[u64]) -> Seed {
        labels.iter().fold(self, |s, &l| s.derive(l))
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }

    pub fn stream(self, labels: &[u64]) -> SimRng {
        self.derive_path(labels).rng()
    }
}

/// One draw from N(mean, variance). Zero variance returns `mean` exactly but
/// still consumes a draw, so stream positions do not depend on noise levels.
pub fn gaussian_sample<R: Rng + ?Sized>(rng: &mut R, mean: f64, variance: f64) -> Result<f64> {
    if !variance.is_finite() {
        return Err(Error::NonFinite("variance"));
    }
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    let z: f64 = rng.sample(StandardNormal);
    if variance == 0.0 {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * z)
}

/// Uniformly distributed unit vector; in the plane when `planar` is set.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, planar: bool) -> Position {
    if planar {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        return Position::new(theta.cos(), theta.sin(), 0.0);
    }
    loop {
        let v = Position::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v * (1.0 / n);
        }
    }
}
