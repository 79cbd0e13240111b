//! Robust range-only position fix.
//!
//! Minimizes `sum_j rho((|q - x_j| - d_j)^2)` with the soft-L1 loss
//! `rho(s) = 2 (sqrt(1 + s) - 1)`. Each iteration linearizes the ranges,
//! weights them by `rho'(s)` and takes a damped Gauss-Newton step; a step is
//! only accepted when the robust cost does not increase.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::DetectionParams;
use crate::error::{Error, Result};
use crate::geometry::{centroid, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub position: Position,
    /// Measured distance from the anchor to the unknown point, meters.
    pub range: f64,
}

impl Anchor {
    pub fn new(position: Position, range: f64) -> Self {
        Self { position, range }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multilateration {
    pub position: Position,
    pub converged: bool,
    pub iterations: usize,
    pub cost: f64,
    /// Anchor residual evaluations performed, for operation accounting.
    pub evaluations: usize,
}

pub fn soft_l1(s: f64) -> f64 {
    2.0 * ((1.0 + s).sqrt() - 1.0)
}

pub fn robust_cost(q: Position, anchors: &[Anchor]) -> f64 {
    anchors
        .iter()
        .map(|a| {
            let r = (q - a.position).norm() - a.range;
            soft_l1(r * r)
        })
        .sum()
}

/// True when the anchors do not span at least a line: all coincident or collinear.
pub fn anchors_degenerate(anchors: &[Anchor]) -> bool {
    let points: Vec<Position> = anchors.iter().map(|a| a.position).collect();
    let Ok(c) = centroid(&points) else {
        return true;
    };
    let mut scatter = Matrix3::<f64>::zeros();
    for p in &points {
        let v = to_vec(*p - c);
        scatter += v * v.transpose();
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[0] <= 1e-12 || eig[1] <= 1e-10 * eig[0]
}

const MAX_DAMPING_TRIES: usize = 40;
const INITIAL_DAMPING: f64 = 1e-3;

/// Closed-form estimate from differenced squared ranges, solved by SVD.
///
/// Subtracting the mean range equation removes the quadratic term:
/// `2 (x_j - c) . q = |x_j|^2 - d_j^2 - mean(|x|^2 - d^2)`. Directions the
/// anchors do not span are left at the anchor centroid.
pub fn linearized_fix(anchors: &[Anchor]) -> Option<Position> {
    let points: Vec<Position> = anchors.iter().map(|a| a.position).collect();
    let c = centroid(&points).ok()?;
    let rhs_of = |a: &Anchor| {
        let v = a.position - c;
        v.dot(&v) - a.range * a.range
    };
    let mean_rhs = anchors.iter().map(rhs_of).sum::<f64>() / anchors.len() as f64;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for a in anchors {
        let row = to_vec(a.position - c) * 2.0;
        ata += row * row.transpose();
        atb += row * (rhs_of(a) - mean_rhs);
    }
    let svd = ata.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let offset = svd.solve(&atb, tol).ok()?;
    let q = c + Position::new(offset[0], offset[1], offset[2]);
    q.is_finite().then_some(q)
}

/// Robust fix of the point whose measured distances to `anchors` are given.
///
/// Damped Gauss-Newton runs from `init`. If that fit leaves an RMS range
/// error above `params.tau` (a local minimum, typically), it is rerun from
/// [`linearized_fix`] and the lower-cost result wins.
pub fn multilaterate(anchors: &[Anchor], init: Position, params: &DetectionParams) -> Result<Multilateration> {
    let need = params.min_anchors.max(1);
    if anchors.len() < need {
        return Err(Error::InsufficientAnchors {
            got: anchors.len(),
            need,
        });
    }
    if !init.is_finite() || anchors.iter().any(|a| !a.position.is_finite() || !a.range.is_finite()) {
        return Err(Error::NonFinite("multilateration input"));
    }
    let degenerate = anchors_degenerate(anchors);
    let mut best = refine(anchors, init, params);
    let rms = (best.cost / anchors.len() as f64).sqrt();
    let restart = if rms > params.tau { linearized_fix(anchors) } else { None };
    if let Some(start) = restart.filter(|&s| s != init) {
        let alt = refine(anchors, start, params);
        let evaluations = best.evaluations + alt.evaluations;
        if alt.cost < best.cost {
            best = alt;
        }
        best.evaluations = evaluations;
    }
    best.converged &= !degenerate;
    Ok(best)
}

fn refine(anchors: &[Anchor], init: Position, params: &DetectionParams) -> Multilateration {
    let m = anchors.len();
    let mut q = init;
    let mut cost = robust_cost(q, anchors);
    let mut evaluations = m;
    let mut lambda = INITIAL_DAMPING;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.k_max {
        iterations = it;
        let (normal, gradient) = weighted_normal_equations(q, anchors);
        evaluations += m;
        if gradient.norm() == 0.0 {
            converged = true;
            break;
        }

        let floor = 1e-12 * (1.0 + normal.trace());
        let damping = Matrix3::from_diagonal(&Vector3::new(
            normal[(0, 0)].max(floor),
            normal[(1, 1)].max(floor),
            normal[(2, 2)].max(floor),
        ));

        let mut step_norm = None;
        for _ in 0..MAX_DAMPING_TRIES {
            let system = normal + damping * lambda;
            let Some(chol) = system.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-gradient));
            let candidate = q + Position::new(delta[0], delta[1], delta[2]);
            let candidate_cost = robust_cost(candidate, anchors);
            evaluations += m;
            if candidate_cost <= cost {
                q = candidate;
                cost = candidate_cost;
                lambda = (lambda * 0.3).max(1e-12);
                step_norm = Some(delta.norm());
                break;
            }
            lambda *= 4.0;
        }

        match step_norm {
            Some(s) if s < params.step_tol => {
                converged = true;
                break;
            }
            Some(_) => {}
            // No damping level reduces the cost: stationary to working precision.
            None => {
                converged = true;
                break;
            }
        }
    }

    Multilateration {
        position: q,
        converged,
        iterations,
        cost,
        evaluations,
    }
}

fn to_vec(p: Position) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

/// `(J^T W J, J^T W r)` at `q`, with soft-L1 weights `1 / sqrt(1 + r^2)`.
fn weighted_normal_equations(q: Position, anchors: &[Anchor]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut normal = Matrix3::zeros();
    let mut gradient = Vector3::zeros();
    for a in anchors {
        let diff = to_vec(q - a.position);
        let dist = diff.norm();
        if dist <= 1e-12 {
            continue;
        }
        let u = diff / dist;
        let r = dist - a.range;
        let w = 1.0 / (1.0 + r * r).sqrt();
        normal += u * u.transpose() * w;
        gradient += u * (w * r);
    }
    (normal, gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean_distance;
    use crate::random::Seed;
    use rand::Rng;

    fn exact_anchors(points: &[Position], target: Position) -> Vec<Anchor> {
        points
            .iter()
            .map(|&p| Anchor::new(p, euclidean_distance(p, target)))
            .collect()
    }

    fn params() -> DetectionParams {
        DetectionParams::default()
    }

    #[test]
    fn soft_l1_shape() {
        assert_eq!(soft_l1(0.0), 0.0);
        // Quadratic near zero, linear in |r| far out.
        assert!((soft_l1(1e-6) - 1e-6).abs() < 1e-12);
        assert!((soft_l1(1e6) - 2.0 * (1e6f64 + 1.0).sqrt() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_point_from_axis_anchors() {
        let anchors = exact_anchors(
            &[
                Position::ORIGIN,
                Position::new(10.0, 0.0, 0.0),
                Position::new(0.0, 10.0, 0.0),
                Position::new(0.0, 0.0, 10.0),
            ],
            Position::new(3.0, 4.0, 5.0),
        );
        let init = centroid(&anchors.iter().map(|a| a.position).collect::<Vec<_>>()).unwrap();
        let fix = multilaterate(&anchors, init, &params()).unwrap();
        assert!(fix.converged);
        assert!(euclidean_distance(fix.position, Position::new(3.0, 4.0, 5.0)) < 1e-6);
    }

    #[test]
    fn recovers_random_targets_from_centroid() {
        let mut rng = Seed(1).rng();
        for _ in 0..200 {
            let pts: Vec<Position> = (0..4)
                .map(|_| {
                    Position::new(
                        rng.random_range(0.0..100.0),
                        rng.random_range(0.0..100.0),
                        rng.random_range(0.0..100.0),
                    )
                })
                .collect();
            let target = Position::new(
                rng.random_range(20.0..80.0),
                rng.random_range(20.0..80.0),
                rng.random_range(20.0..80.0),
            );
            let anchors = exact_anchors(&pts, target);
            let init = centroid(&pts).unwrap();
            let fix = multilaterate(&anchors, init, &params()).unwrap();
            if fix.cost < 1e-12 {
                assert!(euclidean_distance(fix.position, target) < 1e-6);
            }
        }
    }

    #[test]
    fn planar_problem_stays_planar() {
        let pts = [
            Position::ORIGIN,
            Position::new(50.0, 0.0, 0.0),
            Position::new(0.0, 50.0, 0.0),
            Position::new(60.0, 70.0, 0.0),
        ];
        let target = Position::new(21.0, 33.0, 0.0);
        let fix = multilaterate(&exact_anchors(&pts, target), Position::new(80.0, 10.0, 0.0), &params()).unwrap();
        assert_eq!(fix.position.z, 0.0);
        assert!(euclidean_distance(fix.position, target) < 1e-6);
        assert!(fix.converged);
    }

    #[test]
    fn linearized_fix_is_exact_on_clean_ranges() {
        let pts = [
            Position::new(43.0, 135.6, 0.0),
            Position::new(101.7, 74.9, 0.0),
            Position::new(186.9, 126.5, 0.0),
            Position::new(172.7, 121.9, 0.0),
        ];
        let target = Position::new(184.2, 148.2, 0.0);
        let q = linearized_fix(&exact_anchors(&pts, target)).unwrap();
        assert!(euclidean_distance(q, target) < 1e-6);
    }

    #[test]
    fn escapes_local_minimum_of_far_start() {
        // Two close anchors next to the target give the cost a second basin
        // that traps a start 50 m away.
        let pts = [
            Position::new(43.0, 135.6, 0.0),
            Position::new(101.7, 74.9, 0.0),
            Position::new(186.9, 126.5, 0.0),
            Position::new(172.7, 121.9, 0.0),
        ];
        let target = Position::new(184.2, 148.2, 0.0);
        let anchors = exact_anchors(&pts, target);
        let fix = multilaterate(&anchors, Position::new(229.4, 126.7, 0.0), &params()).unwrap();
        assert!(euclidean_distance(fix.position, target) < 1e-6);
    }

    #[test]
    fn insufficient_anchors() {
        let anchors = exact_anchors(&[Position::ORIGIN, Position::new(1.0, 0.0, 0.0)], Position::ORIGIN);
        let err = multilaterate(&anchors, Position::ORIGIN, &params()).unwrap_err();
        assert!(err.to_string().starts_with("insufficient anchors"));
    }

    #[test]
    fn collinear_anchors_do_not_converge() {
        let pts = [
            Position::ORIGIN,
            Position::new(10.0, 0.0, 0.0),
            Position::new(20.0, 0.0, 0.0),
            Position::new(35.0, 0.0, 0.0),
        ];
        let anchors = exact_anchors(&pts, Position::new(5.0, 7.0, 1.0));
        assert!(anchors_degenerate(&anchors));
        let fix = multilaterate(&anchors, Position::new(1.0, 1.0, 1.0), &params()).unwrap();
        assert!(!fix.converged);
    }

    #[test]
    fn cost_never_increases() {
        // Run one iteration at a time from the previous output.
        let mut rng = Seed(2).rng();
        let pts: Vec<Position> = (0..6)
            .map(|_| Position::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 0.0))
            .collect();
        let target = Position::new(40.0, 60.0, 0.0);
        let anchors: Vec<Anchor> = pts
            .iter()
            .map(|&p| Anchor::new(p, euclidean_distance(p, target) + rng.random_range(-1.0..1.0)))
            .collect();
        let single = DetectionParams {
            k_max: 1,
            ..params()
        };
        let mut q = Position::new(150.0, -40.0, 0.0);
        let mut last = robust_cost(q, &anchors);
        for _ in 0..50 {
            let fix = multilaterate(&anchors, q, &single).unwrap();
            assert!(fix.cost <= last);
            last = fix.cost;
            q = fix.position;
        }
    }
}
