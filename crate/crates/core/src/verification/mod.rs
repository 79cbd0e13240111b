//! Leader-side fault detection and position recovery.
//!
//! The leader receives one [`ClientReport`] per node, scores every node by
//! pairwise range consistency ([`compute_votes`]), and re-solves the position
//! of each flagged node from its unflagged peers ([`multilaterate`]).
//! [`verify_and_recover`] runs both stages end to end.

mod calibration;
mod multilateration;
mod pipeline;
mod residual;
mod votes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::sensors::RangeMatrix;

pub use calibration::{calibrate_threshold, honest_residuals, Calibration, MIN_CALIBRATION_TRIALS};
pub use multilateration::{
    anchors_degenerate, linearized_fix, multilaterate, robust_cost, soft_l1, Anchor, Multilateration,
};
pub use pipeline::{verify_and_recover, Verification};
pub use residual::residual;
pub use votes::{compute_votes, VoteTally};

/// Measurement message a node sends the leader each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientReport {
    pub node_id: usize,
    pub reported_position: Position,
    /// The node's own dead-reckoned position, used when recovery falls back to INS.
    pub ins_estimate: Position,
    /// Measured distance to every peer, `(peer id, meters)`.
    pub range_row: Vec<(usize, f64)>,
}

/// What to do with a flagged node that has fewer than `min_anchors` unflagged peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Keep the node's own INS position.
    #[default]
    InsOnly,
    /// Multilaterate against every other node, flagged or not.
    AllPeers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// Start the solver at the node's own (possibly spoofed) report.
    #[default]
    Reported,
    /// Start at the centroid of the anchors.
    Centroid,
}

/// Resolved detection and recovery parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Pairwise consistency tolerance for stage-1 votes, meters.
    pub tau: f64,
    /// A recovered position this far or closer to the report keeps the report.
    pub epsilon: f64,
    pub k_max: usize,
    /// Optional residual alarm `T`; when set, unflagged nodes whose residual
    /// exceeds it are flagged as well.
    pub residual_threshold: Option<f64>,
    pub step_tol: f64,
    pub min_anchors: usize,
    pub fallback: FallbackPolicy,
    pub init: InitPolicy,
}

impl DetectionParams {
    pub fn with_tolerance(tau: f64) -> Self {
        Self {
            tau,
            epsilon: tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tau) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !positive(self.epsilon) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !positive(self.step_tol) {
            return Err(Error::Config(format!("step_tol must be > 0, got {}", self.step_tol)));
        }
        if self.k_max < 1 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.min_anchors < 1 {
            return Err(Error::Config("min_anchors must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            epsilon: 1.0,
            k_max: 100,
            residual_threshold: None,
            step_tol: 1e-9,
            min_anchors: 3,
            fallback: FallbackPolicy::InsOnly,
            init: InitPolicy::Reported,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AcceptedReport,
    Multilaterated,
    InsFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub node_id: usize,
    pub verified_position: Position,
    pub faulty: bool,
    pub provenance: Provenance,
    /// Range residual of the report against unflagged peers, meters.
    pub residual: f64,
    /// Distance between the report and the recovered position, meters.
    pub deviation: f64,
}

/// Assemble the leader's range matrix from the rows in `reports`.
///
/// Entry `(a, b)` averages what `a` reported about `b` and what `b` reported
/// about `a`; missing directions fall back to the one that is present.
pub fn ranges_from_reports(reports: &[ClientReport]) -> Result<RangeMatrix> {
    let n = reports.len();
    let mut index = std::collections::BTreeMap::new();
    for (i, r) in reports.iter().enumerate() {
        if index.insert(r.node_id, i).is_some() {
            return Err(Error::Config(format!("duplicate report from node {}", r.node_id)));
        }
    }
    let mut seen = vec![None; n * n];
    for (i, r) in reports.iter().enumerate() {
        for &(peer, d) in &r.range_row {
            if let Some(&j) = index.get(&peer) {
                if j != i {
                    seen[i * n + j] = Some(d);
                }
            }
        }
    }
    let mut m = RangeMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = match (seen[i * n + j], seen[j * n + i]) {
                (Some(a), Some(b)) => (a + b) / 2.0,
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => {
                    return Err(Error::Config(format!(
                        "no range between nodes {} and {}",
                        reports[i].node_id, reports[j].node_id
                    )))
                }
            };
            m.set(i, j, v);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: usize, row: Vec<(usize, f64)>) -> ClientReport {
        ClientReport {
            node_id: id,
            reported_position: Position::ORIGIN,
            ins_estimate: Position::ORIGIN,
            range_row: row,
        }
    }

    #[test]
    fn matrix_from_rows() {
        let reports = vec![
            report(0, vec![(1, 4.0), (2, 6.0)]),
            report(1, vec![(0, 4.0), (2, 3.0)]),
            report(2, vec![(0, 8.0), (1, 3.0)]),
        ];
        let m = ranges_from_reports(&reports).unwrap();
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.get(2, 0), 7.0);
        assert_eq!(m.get(1, 2), 3.0);
    }

    #[test]
    fn matrix_for_subset_of_nodes() {
        // Node 1 missing: ids 0 and 2 map to rows 0 and 1.
        let reports = vec![report(0, vec![(1, 4.0), (2, 6.0)]), report(2, vec![(0, 6.0), (1, 3.0)])];
        let m = ranges_from_reports(&reports).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.get(0, 1), 6.0);
    }

    #[test]
    fn params_validation() {
        assert!(DetectionParams::default().validate().is_ok());
        let bad = DetectionParams {
            tau: 0.0,
            ..DetectionParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectionParams {
            k_max: 0,
            ..DetectionParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
