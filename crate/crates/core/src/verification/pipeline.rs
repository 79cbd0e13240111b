use serde::{Deserialize, Serialize};

use super::{
    anchors_degenerate, compute_votes, multilaterate, residual, Anchor, ClientReport, DetectionParams,
    FallbackPolicy, InitPolicy, Provenance, VerificationOutcome, VoteTally,
};
use crate::error::{Error, Result};
use crate::geometry::{centroid, euclidean_distance, Position};
use crate::sensors::RangeMatrix;

/// Everything the leader produces for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub outcomes: Vec<VerificationOutcome>,
    pub tallies: Vec<VoteTally>,
    /// Peer distance relations the leader handled: one per pairwise check,
    /// per residual term and per anchor of a recovery.
    pub leader_ops: u64,
    /// Anchor distance evaluations spent inside the solver.
    pub solver_evaluations: u64,
}

/// Two-stage leader verification over one round of reports.
///
/// Index `i` of `ranges` and `ins_estimates` refers to `reports[i]`.
pub fn verify_and_recover(
    reports: &[ClientReport],
    ranges: &RangeMatrix,
    ins_estimates: &[Position],
    params: &DetectionParams,
) -> Result<Verification> {
    params.validate()?;
    let n = reports.len();
    if ins_estimates.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: ins_estimates.len(),
        });
    }
    let tallies = compute_votes(reports, ranges, params.tau)?;
    let mut ops = (n * (n - 1)) as u64;
    let mut solver_evaluations = 0;
    let mut flagged: Vec<bool> = tallies.iter().map(|t| t.flagged).collect();

    let peers_of = |a: usize, flagged: &[bool], include_flagged: bool| -> Vec<(Position, f64)> {
        (0..n)
            .filter(|&b| b != a && (include_flagged || !flagged[b]))
            .map(|b| (reports[b].reported_position, ranges.get(a, b)))
            .collect()
    };

    if let Some(threshold) = params.residual_threshold {
        let stage_one = flagged.clone();
        for a in 0..n {
            if stage_one[a] {
                continue;
            }
            let peers = peers_of(a, &stage_one, false);
            if peers.is_empty() {
                continue;
            }
            ops += peers.len() as u64;
            if residual(&reports[a], &peers)? > threshold {
                flagged[a] = true;
            }
        }
    }

    let mut outcomes = Vec::with_capacity(n);
    for a in 0..n {
        let report = &reports[a];
        let mut peers = peers_of(a, &flagged, false);
        if peers.is_empty() {
            peers = peers_of(a, &flagged, true);
        }
        ops += peers.len() as u64;
        let e = residual(report, &peers)?;

        if !flagged[a] {
            outcomes.push(VerificationOutcome {
                node_id: report.node_id,
                verified_position: report.reported_position,
                faulty: false,
                provenance: Provenance::AcceptedReport,
                residual: e,
                deviation: 0.0,
            });
            continue;
        }

        let ins_outcome = || VerificationOutcome {
            node_id: report.node_id,
            verified_position: ins_estimates[a],
            faulty: true,
            provenance: Provenance::InsFallback,
            residual: e,
            deviation: euclidean_distance(report.reported_position, ins_estimates[a]),
        };

        let mut anchors: Vec<Anchor> = peers_of(a, &flagged, false)
            .into_iter()
            .map(|(p, d)| Anchor::new(p, d))
            .collect();
        if anchors.len() < params.min_anchors {
            match params.fallback {
                FallbackPolicy::InsOnly => {
                    outcomes.push(ins_outcome());
                    continue;
                }
                FallbackPolicy::AllPeers => {
                    anchors = peers_of(a, &flagged, true)
                        .into_iter()
                        .map(|(p, d)| Anchor::new(p, d))
                        .collect();
                    if anchors.len() < params.min_anchors {
                        outcomes.push(ins_outcome());
                        continue;
                    }
                }
            }
        }
        if anchors_degenerate(&anchors) {
            outcomes.push(ins_outcome());
            continue;
        }

        let init = match params.init {
            InitPolicy::Reported => report.reported_position,
            InitPolicy::Centroid => centroid(&anchors.iter().map(|a| a.position).collect::<Vec<_>>())?,
        };
        let fix = multilaterate(&anchors, init, params)?;
        ops += anchors.len() as u64;
        solver_evaluations += fix.evaluations as u64;
        let deviation = euclidean_distance(report.reported_position, fix.position);
        if deviation > params.epsilon {
            outcomes.push(VerificationOutcome {
                node_id: report.node_id,
                verified_position: fix.position,
                faulty: true,
                provenance: Provenance::Multilaterated,
                residual: e,
                deviation,
            });
        } else {
            outcomes.push(VerificationOutcome {
                node_id: report.node_id,
                verified_position: report.reported_position,
                faulty: false,
                provenance: Provenance::AcceptedReport,
                residual: e,
                deviation,
            });
        }
    }

    Ok(Verification {
        outcomes,
        tallies,
        leader_ops: ops,
        solver_evaluations,
    })
}
