use serde::{Deserialize, Serialize};

use super::{RoundRecord, SwarmConfig};
use crate::geometry::Position;
use crate::verification::Provenance;

/// Per-node positions for plotting truth, report and recovery side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    #[serde(rename = "true")]
    pub truth: Position,
    pub reported: Position,
    pub recovered: Position,
    pub flagged: bool,
    pub attacked: bool,
    pub provenance: Provenance,
    pub votes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub config: SwarmConfig,
    pub round: u64,
    pub nodes: Vec<NodeRecord>,
}

pub fn snapshot_round(config: &SwarmConfig, record: &RoundRecord) -> Snapshot {
    let nodes = record
        .outcomes
        .iter()
        .map(|o| {
            let state = &record.states[o.node_id];
            NodeRecord {
                id: o.node_id,
                truth: state.true_position,
                reported: state.gnss_reading,
                recovered: o.verified_position,
                flagged: o.faulty,
                attacked: state.is_attacked,
                provenance: o.provenance,
                votes: record.tallies.get(o.node_id).map_or(0, |t| t.votes),
            }
        })
        .collect();
    Snapshot {
        config: config.clone(),
        round: record.round,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_round;
    use crate::harness::World;
    use crate::random::Seed;

    #[test]
    fn honest_round_keeps_reports() {
        let config = SwarmConfig {
            f: 0,
            n: 6,
            ..SwarmConfig::default()
        };
        let params = config.resolve_detection().unwrap().params;
        let mut w = World::new(&config, Seed(1)).unwrap();
        let rec = run_round(&mut w, &config, &params).unwrap();
        let snap = snapshot_round(&config, &rec);
        assert_eq!(snap.nodes.len(), 6);
        for node in &snap.nodes {
            if !node.flagged {
                assert_eq!(node.reported, node.recovered);
            }
        }
    }
}
