//! Two of six drones spoofed by 50 m with perfect sensors: both are caught
//! and put back exactly where they are.

use swarmraft::harness::{snapshot_round, Simulation, SwarmConfig};
use swarmraft::{CovarianceDiag, Seed};

fn main() -> swarmraft::Result<()> {
    let config = SwarmConfig {
        n: 6,
        f: 2,
        dimension: 2,
        r_gnss: CovarianceDiag::ZERO,
        r_ins: CovarianceDiag::ZERO,
        sigma_d: 0.0,
        ..SwarmConfig::default()
    };
    let params = config.resolve_detection()?.params;
    let record = Simulation::new(&config, params, Seed(1))?.run_round()?;
    let snapshot = snapshot_round(&config, &record);

    println!("{:>3} {:>18} {:>18} {:>18} {:>8} {:>6}", "id", "true", "reported", "recovered", "flagged", "votes");
    for node in &snapshot.nodes {
        let fmt = |p: swarmraft::Position| format!("({:.2}, {:.2})", p.x, p.y);
        println!(
            "{:>3} {:>18} {:>18} {:>18} {:>8} {:>6}",
            node.id,
            fmt(node.truth),
            fmt(node.reported),
            fmt(node.recovered),
            node.flagged,
            node.votes
        );
    }
    Ok(())
}
