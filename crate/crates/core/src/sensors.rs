//! Sensor models: GNSS fixes, INS dead reckoning and inter-node ranging.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean_distance, CovarianceDiag, Position};
use crate::random::{gaussian_sample, random_unit};

/// Per-drone state for one round. `is_attacked` is ground truth used only for
/// scoring; the protocol never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub true_position: Position,
    pub ins_estimate: Position,
    pub gnss_reading: Position,
    pub is_attacked: bool,
}

impl NodeState {
    /// Round-zero state: the true position is known, so INS and GNSS agree with it.
    pub fn at_origin_round(id: usize, true_position: Position) -> Self {
        Self {
            id,
            true_position,
            ins_estimate: true_position,
            gnss_reading: true_position,
            is_attacked: false,
        }
    }
}

/// Displacement over one step as reported by the inertial unit, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionIncrement {
    pub delta: Position,
}

/// Symmetric matrix of measured inter-node distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeMatrix {
    n: usize,
    d: Vec<f64>,
}

impl RangeMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            d: vec![0.0; n * n],
        }
    }

    /// Exact pairwise distances, no noise.
    pub fn exact(positions: &[Position]) -> Self {
        let mut m = Self::zeros(positions.len());
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                m.set(i, j, euclidean_distance(positions[i], positions[j]));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`, clamping at zero. The diagonal is fixed.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            return;
        }
        let v = value.max(0.0);
        self.d[i * self.n + j] = v;
        self.d[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

pub fn sample_gnss<R: Rng + ?Sized>(
    true_pos: Position,
    r_gnss: &CovarianceDiag,
    rng: &mut R,
) -> Position {
    true_pos + noise_vector(r_gnss, rng)
}

pub fn propagate_ins<R: Rng + ?Sized>(
    prev_estimate: Position,
    increment: &MotionIncrement,
    r_ins: &CovarianceDiag,
    rng: &mut R,
) -> Position {
    prev_estimate + increment.delta + noise_vector(r_ins, rng)
}

fn noise_vector<R: Rng + ?Sized>(cov: &CovarianceDiag, rng: &mut R) -> Position {
    let [vx, vy, vz] = cov.variances();
    // Variances are validated by CovarianceDiag, so sampling cannot fail.
    let draw = |rng: &mut R, v: f64| gaussian_sample(rng, 0.0, v).unwrap_or(0.0);
    let x = draw(rng, vx);
    let y = draw(rng, vy);
    let z = draw(rng, vz);
    Position::new(x, y, z)
}

/// One noise draw per unordered pair, in `(0,1), (0,2), .., (1,2), ..` order.
pub fn measure_ranges<R: Rng + ?Sized>(
    true_positions: &[Position],
    sigma_d: f64,
    rng: &mut R,
) -> Result<RangeMatrix> {
    let n = true_positions.len();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    if !(sigma_d >= 0.0 && sigma_d.is_finite()) {
        return Err(Error::NegativeVariance(sigma_d));
    }
    let variance = sigma_d * sigma_d;
    let mut m = RangeMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let exact = euclidean_distance(true_positions[i], true_positions[j]);
            let eta = gaussian_sample(rng, 0.0, variance)?;
            m.set(i, j, exact + eta);
        }
    }
    Ok(m)
}

/// Ground-truth motion profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    #[default]
    Static,
    /// Each node flies a fixed random heading at `speed` meters per round.
    ConstantVelocity { speed: f64 },
}

impl Motion {
    pub fn velocities<R: Rng + ?Sized>(&self, n: usize, planar: bool, rng: &mut R) -> Vec<Position> {
        match *self {
            Motion::Static => vec![Position::ORIGIN; n],
            Motion::ConstantVelocity { speed } => (0..n)
                .map(|_| random_unit(rng, planar) * speed)
                .collect(),
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Uniform placement in `[0, bounding_box]^dim` with pairwise separation of at
/// least `min_separation`, by rejection sampling.
pub fn sample_formation<R: Rng + ?Sized>(
    n: usize,
    planar: bool,
    bounding_box: f64,
    min_separation: f64,
    rng: &mut R,
) -> Result<Vec<Position>> {
    let mut placed: Vec<Position> = Vec::with_capacity(n);
    let mut attempts = 0;
    while placed.len() < n {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::InfeasibleFormation {
                n,
                min_separation,
                bounding_box,
            });
        }
        let x = rng.random_range(0.0..=bounding_box);
        let y = rng.random_range(0.0..=bounding_box);
        let z = if planar {
            0.0
        } else {
            rng.random_range(0.0..=bounding_box)
        };
        let candidate = Position::new(x, y, z);
        if placed
            .iter()
            .all(|p| euclidean_distance(*p, candidate) >= min_separation)
        {
            placed.push(candidate);
        }
    }
    Ok(placed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::Seed;

    fn variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn gnss_without_noise_is_exact() {
        let mut rng = Seed(1).rng();
        let p = Position::new(1.0, -2.0, 3.5);
        assert_eq!(sample_gnss(p, &CovarianceDiag::ZERO, &mut rng), p);
    }

    #[test]
    fn gnss_noise_matches_covariance() {
        let cov = CovarianceDiag::new([4.0, 1.0, 0.25]).unwrap();
        let mut rng = Seed(2).rng();
        let n = 100_000;
        let samples: Vec<Position> = (0..n)
            .map(|_| sample_gnss(Position::ORIGIN, &cov, &mut rng))
            .collect();
        let axes: [Vec<f64>; 3] = [
            samples.iter().map(|p| p.x).collect(),
            samples.iter().map(|p| p.y).collect(),
            samples.iter().map(|p| p.z).collect(),
        ];
        for (axis, &v) in axes.iter().zip(cov.variances().iter()) {
            let var = variance(axis);
            assert!((var - v).abs() / v < 0.05, "variance {var} vs {v}");
            let mean = axis.iter().sum::<f64>() / n as f64;
            let bound = 3.0 * v.sqrt() / (n as f64).sqrt();
            assert!(mean.abs() < bound, "mean {mean} bound {bound}");
        }
    }

    #[test]
    fn ins_zero_noise_adds_increment() {
        let mut rng = Seed(3).rng();
        let step = MotionIncrement {
            delta: Position::new(1.0, 0.0, 0.0),
        };
        let p = propagate_ins(Position::ORIGIN, &step, &CovarianceDiag::ZERO, &mut rng);
        assert_eq!(p, Position::new(1.0, 0.0, 0.0));

        let still = MotionIncrement::default();
        let mut q = Position::new(5.0, 6.0, 7.0);
        for _ in 0..50 {
            q = propagate_ins(q, &still, &CovarianceDiag::ZERO, &mut rng);
        }
        assert_eq!(q, Position::new(5.0, 6.0, 7.0));
    }

    #[test]
    fn ins_drift_grows_linearly() {
        let sigma2 = 0.25;
        let cov = CovarianceDiag::isotropic(sigma2).unwrap();
        let steps = 10;
        let runs = 10_000;
        let mut rng = Seed(4).rng();
        let still = MotionIncrement::default();
        let finals: Vec<f64> = (0..runs)
            .map(|_| {
                let mut p = Position::ORIGIN;
                for _ in 0..steps {
                    p = propagate_ins(p, &still, &cov, &mut rng);
                }
                p.x
            })
            .collect();
        let expected = steps as f64 * sigma2;
        let var = variance(&finals);
        assert!((var - expected).abs() / expected < 0.10, "{var} vs {expected}");
    }

    #[test]
    fn ranges_exact_without_noise() {
        let pts = [
            Position::ORIGIN,
            Position::new(3.0, 4.0, 0.0),
            Position::new(0.0, 0.0, 12.0),
        ];
        let mut rng = Seed(5).rng();
        let m = measure_ranges(&pts, 0.0, &mut rng).unwrap();
        assert_eq!(m, RangeMatrix::exact(&pts));
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(2, 0), 12.0);
    }

    #[test]
    fn ranges_need_two_nodes() {
        let mut rng = Seed(5).rng();
        assert!(matches!(
            measure_ranges(&[Position::ORIGIN], 1.0, &mut rng),
            Err(Error::TooFewNodes(1))
        ));
    }

    #[test]
    fn range_noise_std() {
        let pts = [Position::ORIGIN, Position::new(10.0, 0.0, 0.0)];
        let mut rng = Seed(6).rng();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| measure_ranges(&pts, 1.0, &mut rng).unwrap().get(0, 1))
            .collect();
        let sd = variance(&xs).sqrt();
        assert!((sd - 1.0).abs() < 0.05, "std {sd}");
    }

    #[test]
    fn one_draw_per_unordered_pair() {
        let pts: Vec<Position> = (0..5)
            .map(|i| Position::new(100.0 * i as f64, 50.0, 0.0))
            .collect();
        let seed = Seed(7);
        let mut rng = seed.rng();
        let m = measure_ranges(&pts, 0.5, &mut rng).unwrap();

        let mut replay = seed.rng();
        let mut k = 0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                let eta = gaussian_sample(&mut replay, 0.0, 0.25).unwrap();
                let exact = euclidean_distance(pts[i], pts[j]);
                assert_eq!(m.get(i, j), (exact + eta).max(0.0));
                k += 1;
            }
        }
        assert_eq!(k, 10);
        // Both streams must now be at the same position.
        assert_eq!(rng.random::<u64>(), replay.random::<u64>());
    }

    #[test]
    fn matrix_symmetric_with_zero_diagonal() {
        let mut rng = Seed(8).rng();
        for _ in 0..50 {
            let pts = sample_formation(7, false, 100.0, 5.0, &mut rng).unwrap();
            let m = measure_ranges(&pts, 3.0, &mut rng).unwrap();
            for i in 0..7 {
                assert_eq!(m.get(i, i), 0.0);
                for j in 0..7 {
                    assert_eq!(m.get(i, j), m.get(j, i));
                    assert!(m.get(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn negative_ranges_clamp() {
        let pts = [Position::ORIGIN, Position::new(0.1, 0.0, 0.0)];
        let mut rng = Seed(9).rng();
        for _ in 0..1000 {
            let m = measure_ranges(&pts, 5.0, &mut rng).unwrap();
            assert!(m.get(0, 1) >= 0.0);
        }
    }

    #[test]
    fn formation_respects_separation() {
        let mut rng = Seed(10).rng();
        let pts = sample_formation(17, false, 200.0, 10.0, &mut rng).unwrap();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                assert!(euclidean_distance(pts[i], pts[j]) >= 10.0);
            }
        }
        let flat = sample_formation(6, true, 200.0, 10.0, &mut rng).unwrap();
        assert!(flat.iter().all(|p| p.z == 0.0));
        assert!(sample_formation(50, true, 10.0, 10.0, &mut rng).is_err());
    }

    #[test]
    fn ins_and_gnss_errors_uncorrelated() {
        let seed = Seed(11);
        let cov = CovarianceDiag::isotropic(1.0).unwrap();
        let step = MotionIncrement::default();
        let trials = 20_000;
        let mut pairs = Vec::with_capacity(trials);
        for t in 0..trials as u64 {
            let mut g = seed.stream(&[crate::random::stream::GNSS, t]);
            let mut i = seed.stream(&[crate::random::stream::INS, t]);
            let gx = sample_gnss(Position::ORIGIN, &cov, &mut g).x;
            let ix = propagate_ins(Position::ORIGIN, &step, &cov, &mut i).x;
            pairs.push((gx, ix));
        }
        let n = trials as f64;
        let mg = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mi = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let cov_gi = pairs.iter().map(|p| (p.0 - mg) * (p.1 - mi)).sum::<f64>() / n;
        let sg = (pairs.iter().map(|p| (p.0 - mg).powi(2)).sum::<f64>() / n).sqrt();
        let si = (pairs.iter().map(|p| (p.1 - mi).powi(2)).sum::<f64>() / n).sqrt();
        let corr = cov_gi / (sg * si);
        assert!(corr.abs() < 0.03, "correlation {corr}");
    }
}
