use serde::{Deserialize, Serialize};

use super::{residual, ClientReport};
use crate::error::{Error, Result};
use crate::harness::{SwarmConfig, World};
use crate::random::Seed;

pub const MIN_CALIBRATION_TRIALS: usize = 30;

/// Honest-residual statistics and the alarm threshold `T = mu + 3 sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mu_e: f64,
    pub sigma_e: f64,
    pub threshold: f64,
    pub trials: usize,
    /// One residual per node per trial.
    pub residuals: Vec<f64>,
}

impl Calibration {
    /// Fraction of the calibration sample above the threshold.
    pub fn exceedance_rate(&self) -> f64 {
        exceedance(&self.residuals, self.threshold)
    }
}

pub(crate) fn exceedance(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&e| e > threshold).count() as f64 / values.len() as f64
}

/// Residual of every node against all of its peers in one honest first round.
pub fn honest_residuals(config: &SwarmConfig, seed: Seed) -> Result<Vec<f64>> {
    let mut world = World::new(config, seed)?;
    let sensed = world.sense(config)?;
    let reports: &[ClientReport] = &sensed.reports;
    reports
        .iter()
        .enumerate()
        .map(|(a, report)| {
            let peers: Vec<_> = reports
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, r)| (r.reported_position, sensed.ranges.get(a, b)))
                .collect();
            residual(report, &peers)
        })
        .collect()
}

/// Run `trials` honest rounds and derive the residual threshold.
///
/// Trial `t` uses the stream `seed.derive(t)`, so the sample is reproducible.
pub fn calibrate_threshold(config: &SwarmConfig, trials: usize, seed: Seed) -> Result<Calibration> {
    if config.f > 0 {
        return Err(Error::AttackEnabled);
    }
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::InsufficientCalibration(trials));
    }
    config.validate()?;
    let mut residuals = Vec::with_capacity(trials * config.n);
    for t in 0..trials {
        residuals.extend(honest_residuals(config, seed.derive(t as u64))?);
    }
    let count = residuals.len() as f64;
    let mu_e = residuals.iter().sum::<f64>() / count;
    let var = residuals.iter().map(|e| (e - mu_e).powi(2)).sum::<f64>() / (count - 1.0);
    let sigma_e = var.sqrt();
    Ok(Calibration {
        mu_e,
        sigma_e,
        threshold: mu_e + 3.0 * sigma_e,
        trials,
        residuals,
    })
}
