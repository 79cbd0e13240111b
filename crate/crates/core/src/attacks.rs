//! Adversary models: GNSS spoofing, range tampering and colluding spoofers.
//!
//! Attacks only ever touch readings and measured ranges. True positions are
//! left alone so that scoring always has clean ground truth.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::random::random_unit;
use crate::sensors::{NodeState, RangeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    #[default]
    GnssSpoof,
    RangeTamper,
    Collusion,
    /// Spoofed GNSS plus biased ranges on every pair touching an attacked node.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetModel {
    FixedVector,
    #[default]
    RandomDirection,
    /// Random initial direction plus a per-round drift: `offset(k) = offset(0) + k * drift`.
    TimeVarying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Spoof displacement in meters for `random_direction` and `time_varying`.
    pub offset_magnitude: f64,
    pub offset_model: OffsetModel,
    /// Displacement used by `fixed_vector`.
    pub fixed_offset: [f64; 3],
    /// Drift speed in meters per round for `time_varying`.
    pub drift_magnitude: f64,
    /// Additive bias on tampered ranges, meters.
    pub range_bias: f64,
    /// Attacked nodes share one rigid displacement.
    pub colluding: bool,
    /// Permit more than `(n - 1) / 2` attacked nodes.
    pub allow_unsafe: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: AttackMode::GnssSpoof,
            offset_magnitude: 50.0,
            offset_model: OffsetModel::RandomDirection,
            fixed_offset: [50.0, 0.0, 0.0],
            drift_magnitude: 0.0,
            range_bias: 0.0,
            colluding: false,
            allow_unsafe: false,
        }
    }
}

impl AttackConfig {
    pub fn spoofs_gnss(&self) -> bool {
        matches!(
            self.mode,
            AttackMode::GnssSpoof | AttackMode::Collusion | AttackMode::Mixed
        )
    }

    pub fn tampers_ranges(&self) -> bool {
        matches!(self.mode, AttackMode::RangeTamper | AttackMode::Mixed)
    }

    pub fn is_collusive(&self) -> bool {
        self.mode == AttackMode::Collusion || (self.colluding && self.spoofs_gnss())
    }
}

/// Uniformly random `f`-subset of `0..n`.
pub fn select_attacked<R: Rng + ?Sized>(n: usize, f: usize, rng: &mut R) -> Result<BTreeSet<usize>> {
    if f >= n {
        return Err(Error::TooManyAttacked { n, f });
    }
    Ok(rand::seq::index::sample(rng, n, f).into_iter().collect())
}

/// Offset trajectory for one spoofer (or one coalition).
#[derive(Debug, Clone, Copy)]
struct SpoofOffset {
    base: Position,
    drift: Position,
}

impl SpoofOffset {
    fn draw<R: Rng + ?Sized>(cfg: &AttackConfig, rng: &mut R, planar: bool) -> Self {
        match cfg.offset_model {
            OffsetModel::FixedVector => SpoofOffset {
                base: Position::from(cfg.fixed_offset),
                drift: Position::ORIGIN,
            },
            OffsetModel::RandomDirection => SpoofOffset {
                base: random_unit(rng, planar) * cfg.offset_magnitude,
                drift: Position::ORIGIN,
            },
            OffsetModel::TimeVarying => {
                let base = random_unit(rng, planar) * cfg.offset_magnitude;
                let drift = random_unit(rng, planar) * cfg.drift_magnitude;
                SpoofOffset { base, drift }
            }
        }
    }

    fn at(&self, round: u64) -> Position {
        self.base + self.drift * round as f64
    }
}

fn check_ids(states: &[NodeState], attacked: &BTreeSet<usize>) -> Result<()> {
    match attacked.iter().find(|&&id| id >= states.len()) {
        Some(&id) => Err(Error::UnknownNode {
            id,
            n: states.len(),
        }),
        None => Ok(()),
    }
}

/// Each attacked node gets its own offset; its reading becomes `truth + offset`.
///
/// Offsets are drawn from `rng` in ascending node order, so handing in the same
/// stream every round yields a persistent per-node bias.
pub fn apply_gnss_spoof<R: Rng + ?Sized>(
    states: &[NodeState],
    attacked: &BTreeSet<usize>,
    cfg: &AttackConfig,
    rng: &mut R,
    round: u64,
    planar: bool,
) -> Result<Vec<NodeState>> {
    check_ids(states, attacked)?;
    let mut out = states.to_vec();
    for &id in attacked {
        let offset = SpoofOffset::draw(cfg, rng, planar);
        let node = &mut out[id];
        node.gnss_reading = node.true_position + offset.at(round);
        node.is_attacked = true;
    }
    Ok(out)
}

/// Every attacked node is displaced by the same vector, so distances among
/// the coalition stay mutually consistent.
pub fn apply_collusion<R: Rng + ?Sized>(
    states: &[NodeState],
    attacked: &BTreeSet<usize>,
    cfg: &AttackConfig,
    rng: &mut R,
    round: u64,
    planar: bool,
) -> Result<Vec<NodeState>> {
    check_ids(states, attacked)?;
    let mut out = states.to_vec();
    if attacked.is_empty() {
        return Ok(out);
    }
    let shared = SpoofOffset::draw(cfg, rng, planar).at(round);
    for &id in attacked {
        let node = &mut out[id];
        node.gnss_reading = node.true_position + shared;
        node.is_attacked = true;
    }
    Ok(out)
}

pub fn apply_range_tamper(
    ranges: &RangeMatrix,
    attacked_pairs: &BTreeSet<(usize, usize)>,
    bias: f64,
) -> Result<RangeMatrix> {
    let mut out = ranges.clone();
    for &(i, j) in attacked_pairs {
        if i == j {
            return Err(Error::SelfPair(i));
        }
        for id in [i, j] {
            if id >= ranges.len() {
                return Err(Error::UnknownNode {
                    id,
                    n: ranges.len(),
                });
            }
        }
        out.set(i, j, ranges.get(i, j) + bias);
    }
    Ok(out)
}

/// Every unordered pair with at least one attacked endpoint.
pub fn pairs_touching(n: usize, attacked: &BTreeSet<usize>) -> BTreeSet<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for &a in attacked {
        for j in 0..n {
            if j != a {
                pairs.insert((a.min(j), a.max(j)));
            }
        }
    }
    pairs
}
