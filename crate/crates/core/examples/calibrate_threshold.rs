//! Derive the residual alarm T = mu + 3 sigma from honest rounds and check
//! how often fresh honest nodes exceed it.

use swarmraft::harness::SwarmConfig;
use swarmraft::verification::{calibrate_threshold, honest_residuals};
use swarmraft::Seed;

fn main() -> swarmraft::Result<()> {
    let config = SwarmConfig {
        f: 0,
        ..SwarmConfig::default()
    };
    let c = calibrate_threshold(&config, 200, Seed(7))?;
    println!("mu = {:.3} m, sigma = {:.3} m, T = {:.3} m", c.mu_e, c.sigma_e, c.threshold);
    println!("in-sample exceedance {:.4} over {} residuals", c.exceedance_rate(), c.residuals.len());

    let fresh: Vec<f64> = (0..400)
        .map(|t| honest_residuals(&config, Seed(1000).derive(t)))
        .collect::<swarmraft::Result<Vec<_>>>()?
        .concat();
    let over = fresh.iter().filter(|&&e| e > c.threshold).count();
    println!("held-out exceedance {:.4} over {} residuals", over as f64 / fresh.len() as f64, fresh.len());
    Ok(())
}
