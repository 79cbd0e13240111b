//! A moving swarm whose spoofers drift their offset each round. Verified
//! positions feed back into dead reckoning between rounds.

use swarmraft::attacks::OffsetModel;
use swarmraft::geometry::mean_absolute_error;
use swarmraft::harness::{Simulation, SwarmConfig};
use swarmraft::sensors::Motion;
use swarmraft::Seed;

fn main() -> swarmraft::Result<()> {
    let mut config = SwarmConfig {
        n: 9,
        f: 3,
        rounds: 10,
        motion: Motion::ConstantVelocity { speed: 5.0 },
        ..SwarmConfig::default()
    };
    config.attack.offset_model = OffsetModel::TimeVarying;
    config.attack.drift_magnitude = 3.0;
    let params = config.resolve_detection()?.params;
    let mut sim = Simulation::new(&config, params, Seed(42))?;
    for _ in 0..config.rounds {
        let r = sim.run_round()?;
        let truths: Vec<_> = r.states.iter().map(|s| s.true_position).collect();
        let reported: Vec<_> = r.states.iter().map(|s| s.gnss_reading).collect();
        let verified: Vec<_> = r.outcomes.iter().map(|o| o.verified_position).collect();
        println!(
            "round {:>2}: reported MAE {:>7.3} m, verified MAE {:>7.3} m, flagged {}",
            r.round,
            mean_absolute_error(&reported, &truths)?,
            mean_absolute_error(&verified, &truths)?,
            r.outcomes.iter().filter(|o| o.faulty).count()
        );
    }
    Ok(())
}
