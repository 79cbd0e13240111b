//! Geometric value types shared by every stage of the pipeline.
//!
//! Everything lives in a local Cartesian frame measured in meters. Planar
//! scenarios keep `z = 0` throughout.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or displacement) in the local frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Position) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        euclidean_distance(*self, *other)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Position {
    fn from(v: [f64; 3]) -> Self {
        Position::new(v[0], v[1], v[2])
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Position {
    fn add_assign(&mut self, rhs: Position) {
        *self = *self + rhs;
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Position {
    type Output = Position;
    fn neg(self) -> Position {
        Position::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Diagonal noise covariance, one variance (m²) per axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct CovarianceDiag {
    variances: [f64; 3],
}

impl CovarianceDiag {
    pub const ZERO: CovarianceDiag = CovarianceDiag {
        variances: [0.0; 3],
    };

    pub fn new(variances: [f64; 3]) -> Result<Self> {
        for &v in &variances {
            if !v.is_finite() {
                return Err(Error::NonFinite("covariance"));
            }
            if v < 0.0 {
                return Err(Error::NegativeVariance(v));
            }
        }
        Ok(Self { variances })
    }

    /// Same variance on every axis.
    pub fn isotropic(variance: f64) -> Result<Self> {
        Self::new([variance; 3])
    }

    pub fn variances(&self) -> [f64; 3] {
        self.variances
    }

    /// Copy with the vertical variance zeroed, for planar scenarios.
    pub fn planar(self) -> Self {
        let [x, y, _] = self.variances;
        Self {
            variances: [x, y, 0.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.variances.iter().all(|&v| v == 0.0)
    }
}

impl TryFrom<[f64; 3]> for CovarianceDiag {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        CovarianceDiag::new(v)
    }
}

impl From<CovarianceDiag> for [f64; 3] {
    fn from(c: CovarianceDiag) -> [f64; 3] {
        c.variances
    }
}

pub fn euclidean_distance(a: Position, b: Position) -> f64 {
    (a - b).norm()
}

pub fn centroid(points: &[Position]) -> Result<Position> {
    if points.is_empty() {
        return Err(Error::EmptyAnchorSet);
    }
    let sum = points
        .iter()
        .fold(Position::ORIGIN, |acc, &p| acc + p);
    Ok(sum * (1.0 / points.len() as f64))
}

/// Mean Euclidean error between paired estimates and ground truth.
pub fn mean_absolute_error(estimates: &[Position], truths: &[Position]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| euclidean_distance(*e, *t))
        .sum();
    Ok(total / estimates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(Position::ORIGIN, Position::ORIGIN), 0.0);
        assert_eq!(
            euclidean_distance(Position::ORIGIN, Position::new(3.0, 4.0, 0.0)),
            5.0
        );
        assert_eq!(
            euclidean_distance(Position::new(1.0, 2.0, 3.0), Position::new(4.0, 6.0, 3.0)),
            5.0
        );
    }

    #[test]
    fn centroid_examples() {
        let mid = centroid(&[Position::ORIGIN, Position::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(mid, Position::new(1.0, 0.0, 0.0));
        let one = centroid(&[Position::new(1.0, 1.0, 1.0)]).unwrap();
        assert_eq!(one, Position::new(1.0, 1.0, 1.0));
        let tri = centroid(&[
            Position::ORIGIN,
            Position::new(3.0, 0.0, 0.0),
            Position::new(0.0, 3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(tri, Position::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn centroid_rejects_empty() {
        let err = centroid(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty anchor set");
    }

    #[test]
    fn mae_examples() {
        let pts = [Position::new(1.0, 2.0, 3.0), Position::new(-1.0, 0.0, 9.0)];
        assert_eq!(mean_absolute_error(&pts, &pts).unwrap(), 0.0);
        assert_eq!(
            mean_absolute_error(&[Position::new(3.0, 4.0, 0.0)], &[Position::ORIGIN]).unwrap(),
            5.0
        );
        let est = [Position::new(2.0, 0.0, 0.0), Position::new(0.0, 4.0, 0.0)];
        let truth = [Position::ORIGIN, Position::ORIGIN];
        assert_eq!(mean_absolute_error(&est, &truth).unwrap(), 3.0);
    }

    #[test]
    fn mae_errors() {
        assert!(matches!(
            mean_absolute_error(&[Position::ORIGIN], &[]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            mean_absolute_error(&[], &[]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn covariance_rejects_negative() {
        assert!(CovarianceDiag::new([1.0, -0.1, 0.0]).is_err());
        assert!(CovarianceDiag::new([1.0, f64::NAN, 0.0]).is_err());
        assert_eq!(CovarianceDiag::isotropic(4.0).unwrap().planar().variances(), [4.0, 4.0, 0.0]);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1.0e3..1.0e3
    }

    fn pos() -> impl Strategy<Value = Position> {
        (coord(), coord(), coord()).prop_map(|(x, y, z)| Position::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in pos(), b in pos()) {
            prop_assert_eq!(euclidean_distance(a, b), euclidean_distance(b, a));
            prop_assert!(euclidean_distance(a, b) >= 0.0);
        }

        #[test]
        fn triangle_inequality(a in pos(), b in pos(), c in pos()) {
            let ab = euclidean_distance(a, b);
            let bc = euclidean_distance(b, c);
            let ac = euclidean_distance(a, c);
            prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ab + bc));
        }

        #[test]
        fn mae_translation_invariant(
            pairs in proptest::collection::vec((pos(), pos()), 1..12),
            shift in pos(),
        ) {
            let (est, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let base = mean_absolute_error(&est, &truth).unwrap();
            let est2: Vec<_> = est.iter().map(|&p| p + shift).collect();
            let truth2: Vec<_> = truth.iter().map(|&p| p + shift).collect();
            let moved = mean_absolute_error(&est2, &truth2).unwrap();
            prop_assert!((base - moved).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
