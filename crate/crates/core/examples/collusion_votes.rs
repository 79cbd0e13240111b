//! Three colluders shift their reports by one shared vector, so they agree
//! with each other. The honest majority still outvotes them.

use std::collections::BTreeSet;

use swarmraft::attacks::{apply_collusion, AttackConfig, AttackMode};
use swarmraft::random::stream;
use swarmraft::sensors::{sample_formation, NodeState, RangeMatrix};
use swarmraft::verification::{compute_votes, ClientReport};
use swarmraft::Seed;

fn main() -> swarmraft::Result<()> {
    let n = 7;
    let seed = Seed(5);
    let truths = sample_formation(n, false, 200.0, 10.0, &mut seed.stream(&[stream::FORMATION]))?;
    let states: Vec<NodeState> = truths.iter().enumerate().map(|(i, &p)| NodeState::at_origin_round(i, p)).collect();
    let attacked = BTreeSet::from([1, 4, 6]);
    let attack = AttackConfig {
        mode: AttackMode::Collusion,
        ..AttackConfig::default()
    };
    let spoofed = apply_collusion(&states, &attacked, &attack, &mut seed.stream(&[stream::SPOOF]), 0, false)?;
    let reports: Vec<ClientReport> = spoofed
        .iter()
        .map(|s| ClientReport {
            node_id: s.id,
            reported_position: s.gnss_reading,
            ins_estimate: s.ins_estimate,
            range_row: Vec::new(),
        })
        .collect();
    for t in compute_votes(&reports, &RangeMatrix::exact(&truths), 1.0)? {
        let role = if attacked.contains(&t.node_id) { "colluder" } else { "honest" };
        println!("node {} ({role:>8}): votes {:>3} flagged {}", t.node_id, t.votes, t.flagged);
    }
    Ok(())
}
