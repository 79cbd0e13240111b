use super::ClientReport;
use crate::error::{Error, Result};
use crate::geometry::{euclidean_distance, Position};

/// RMS range violation of `report` against peers given as `(position, measured range)`.
///
/// Zero exactly when the reported position lies on every peer's range sphere.
pub fn residual(report: &ClientReport, verified_peers: &[(Position, f64)]) -> Result<f64> {
    if verified_peers.is_empty() {
        return Err(Error::EmptyPeerSet);
    }
    let sum_sq: f64 = verified_peers
        .iter()
        .map(|&(peer, d)| {
            let v = euclidean_distance(report.reported_position, peer) - d;
            v * v
        })
        .sum();
    Ok((sum_sq / verified_peers.len() as f64).sqrt())
}
