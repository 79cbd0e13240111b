use serde::{Deserialize, Serialize};

use super::ClientReport;
use crate::error::{Error, Result};
use crate::geometry::euclidean_distance;
use crate::sensors::RangeMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub node_id: usize,
    /// Consistent peers minus inconsistent peers.
    pub votes: i64,
    /// `votes < 0`; a zero tally counts as honest.
    pub flagged: bool,
}

/// Stage 1: a pair `(A, B)` is consistent when the distance between their
/// reports is within `tau` of the measured range.
pub fn compute_votes(reports: &[ClientReport], ranges: &RangeMatrix, tau: f64) -> Result<Vec<VoteTally>> {
    let n = reports.len();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    if ranges.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ranges.len(),
        });
    }
    let tallies = (0..n)
        .map(|a| {
            let votes: i64 = (0..n)
                .filter(|&b| b != a)
                .map(|b| {
                    let from_reports =
                        euclidean_distance(reports[a].reported_position, reports[b].reported_position);
                    if (from_reports - ranges.get(a, b)).abs() < tau {
                        1
                    } else {
                        -1
                    }
                })
                .sum();
            VoteTally {
                node_id: reports[a].node_id,
                votes,
                flagged: votes < 0,
            }
        })
        .collect();
    Ok(tallies)
}
