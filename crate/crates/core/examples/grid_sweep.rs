//! Small (n, f) grid written as CSV to stdout.

use swarmraft::export::summary_csv;
use swarmraft::harness::{grid_sweep, SwarmConfig};

fn main() -> swarmraft::Result<()> {
    let run = grid_sweep(&SwarmConfig::default(), &[5, 9, 13], &[1, 2, 4, 6], 100, None)?;
    print!("{}", summary_csv(&run.summary)?);
    for c in &run.summary.cells {
        eprintln!("({:>2},{}) dominance {:.3}, exact detection {:.3}", c.n, c.f, c.dominance_rate, c.exact_detection_rate);
    }
    Ok(())
}
