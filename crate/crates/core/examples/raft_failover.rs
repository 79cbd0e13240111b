//! Crash the leader of a five-node cluster mid-run and check that a new
//! leader takes over and no committed round is lost.

use swarmraft::raft::demo::{run_demo, DemoConfig, LeaderCrash};
use swarmraft::Seed;

fn main() -> swarmraft::Result<()> {
    let config = DemoConfig {
        seed: Seed(3),
        leader_crashes: vec![LeaderCrash { tick: 30, duration: 25 }, LeaderCrash { tick: 80, duration: 10 }],
        ..DemoConfig::default()
    };
    let (report, cluster) = run_demo(&config, false)?;
    for (tick, node, term) in &report.elections {
        println!("tick {tick:>3}: node {node} leads term {term}");
    }
    for r in &report.verdict.reelections {
        println!(
            "leader {} down at {} -> replaced at {:?} (bound {})",
            r.crashed_leader, r.crash_tick, r.elected_tick, r.bound
        );
    }
    println!(
        "{} of {} rounds committed, commit index per node {:?}",
        report.rounds_committed,
        report.rounds_offered,
        cluster.nodes().iter().map(|n| n.commit_index).collect::<Vec<_>>()
    );
    println!("verdict: {}", if report.verdict.passed { "PASS" } else { "FAIL" });
    Ok(())
}
