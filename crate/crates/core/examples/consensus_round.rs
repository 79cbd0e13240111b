//! The same spoofed swarm verified directly and through the replicated log:
//! identical outcomes, plus the cost of agreeing on them.

use swarmraft::harness::{Simulation, SwarmConfig};
use swarmraft::Seed;

fn main() -> swarmraft::Result<()> {
    let mut config = SwarmConfig {
        n: 7,
        f: 2,
        rounds: 3,
        ..SwarmConfig::default()
    };
    let params = config.resolve_detection()?.params;
    let mut direct = Simulation::new(&config, params.clone(), Seed(21))?;
    config.consensus_enabled = true;
    let mut replicated = Simulation::new(&config, params, Seed(21))?;
    for _ in 0..config.rounds {
        let a = direct.run_round()?;
        let b = replicated.run_round()?;
        println!(
            "round {}: same outcomes {}, leader {:?}, {} leader messages, committed in {} ticks",
            b.round,
            a.outcomes == b.outcomes,
            b.leader,
            b.messages.unwrap_or(0),
            b.ticks_to_commit.unwrap_or(0)
        );
    }
    Ok(())
}
