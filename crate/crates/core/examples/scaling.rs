//! Recovered error of the minimal safe swarm n = 2f + 1 as f grows.

use swarmraft::harness::{scaling_experiment, SwarmConfig};

fn main() -> swarmraft::Result<()> {
    let run = scaling_experiment(&SwarmConfig::default(), &[1, 2, 3, 4, 5, 6, 7, 8], 200, None)?;
    println!("{:>3} {:>3} {:>10} {:>10} {:>14} {:>12}", "n", "f", "baseline", "recovered", "attacked only", "tau");
    for c in &run.summary.cells {
        println!(
            "{:>3} {:>3} {:>10.3} {:>10.3} {:>14.3} {:>12.3}",
            c.n,
            c.f,
            c.baseline.mean,
            c.recovered.mean,
            c.attacked_recovered.map_or(f64::NAN, |s| s.mean),
            c.tau
        );
    }
    Ok(())
}
