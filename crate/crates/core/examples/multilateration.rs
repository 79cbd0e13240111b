//! Locate a point from noisy distances to seven anchors, one of them 25 m off.

use swarmraft::geometry::euclidean_distance;
use swarmraft::verification::{multilaterate, Anchor, DetectionParams};
use swarmraft::Position;

fn main() -> swarmraft::Result<()> {
    let target = Position::new(60.0, 80.0, 20.0);
    let anchors: Vec<Anchor> = [
        (Position::new(0.0, 0.0, 0.0), 0.3),
        (Position::new(150.0, 0.0, 10.0), -0.4),
        (Position::new(0.0, 150.0, 40.0), 0.2),
        (Position::new(120.0, 140.0, 0.0), 0.1),
        (Position::new(30.0, 40.0, 90.0), -0.2),
        (Position::new(180.0, 90.0, 60.0), 0.4),
        (Position::new(90.0, 30.0, 80.0), 25.0),
    ]
    .into_iter()
    .map(|(p, err)| Anchor::new(p, euclidean_distance(p, target) + err))
    .collect();
    let fix = multilaterate(&anchors, Position::new(100.0, 100.0, 0.0), &DetectionParams::default())?;
    println!(
        "estimate ({:.3}, {:.3}, {:.3}), error {:.3} m, {} iterations, converged {}",
        fix.position.x,
        fix.position.y,
        fix.position.z,
        euclidean_distance(fix.position, target),
        fix.iterations,
        fix.converged
    );
    Ok(())
}
