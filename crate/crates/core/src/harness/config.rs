use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackConfig;
use crate::error::{Error, Result};
use crate::geometry::CovarianceDiag;
use crate::raft::RaftSettings;
use crate::random::{stream, Seed};
use crate::sensors::Motion;
use crate::verification::{
    calibrate_threshold, Calibration, DetectionParams, FallbackPolicy, InitPolicy, MIN_CALIBRATION_TRIALS,
};

/// Smallest tolerance used when calibration yields zero (noise-free sensors).
pub const MIN_TOLERANCE: f64 = 1e-6;

/// Detection settings as written in a config file. Unset `tau`, `epsilon` and
/// `residual_threshold` are filled in from an honest calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_max: usize,
    pub step_tol: f64,
    pub min_anchors: usize,
    pub fallback: FallbackPolicy,
    pub init: InitPolicy,
    /// Enable the secondary residual alarm.
    pub residual_detector: bool,
    pub residual_threshold: Option<f64>,
    pub calibration_trials: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        let p = DetectionParams::default();
        Self {
            tau: None,
            epsilon: None,
            k_max: p.k_max,
            step_tol: p.step_tol,
            min_anchors: p.min_anchors,
            fallback: p.fallback,
            init: p.init,
            residual_detector: false,
            residual_threshold: None,
            calibration_trials: 200,
        }
    }
}

impl DetectionConfig {
    fn needs_calibration(&self) -> bool {
        self.tau.is_none() || (self.residual_detector && self.residual_threshold.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub n: usize,
    pub f: usize,
    pub rounds: u64,
    /// 2 for planar swarms, 3 otherwise.
    pub dimension: usize,
    pub bounding_box: f64,
    pub min_separation: f64,
    pub r_gnss: CovarianceDiag,
    pub r_ins: CovarianceDiag,
    pub sigma_d: f64,
    pub motion: Motion,
    pub attack: AttackConfig,
    pub detection: DetectionConfig,
    /// Route every round through the Raft cluster instead of calling the
    /// verifier directly.
    pub consensus_enabled: bool,
    pub raft: RaftSettings,
    pub seed: Seed,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n: 5,
            f: 1,
            rounds: 1,
            dimension: 3,
            bounding_box: 200.0,
            min_separation: 10.0,
            r_gnss: CovarianceDiag::isotropic(4.0).expect("valid variance"),
            r_ins: CovarianceDiag::isotropic(0.25).expect("valid variance"),
            sigma_d: 0.5,
            motion: Motion::Static,
            attack: AttackConfig::default(),
            detection: DetectionConfig::default(),
            consensus_enabled: false,
            raft: RaftSettings::default(),
            seed: Seed(0),
        }
    }
}

/// Detection parameters ready for use, plus the calibration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDetection {
    pub params: DetectionParams,
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub mu_e: f64,
    pub sigma_e: f64,
    pub threshold: f64,
    pub trials: usize,
}

impl From<&Calibration> for CalibrationSummary {
    fn from(c: &Calibration) -> Self {
        Self {
            mu_e: c.mu_e,
            sigma_e: c.sigma_e,
            threshold: c.threshold,
            trials: c.trials,
        }
    }
}

impl SwarmConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: SwarmConfig = toml::from_str(&text).map_err(|source| Error::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn planar(&self) -> bool {
        self.dimension == 2
    }

    /// Noise covariances with the vertical axis removed in planar mode.
    pub fn effective_r_gnss(&self) -> CovarianceDiag {
        if self.planar() {
            self.r_gnss.planar()
        } else {
            self.r_gnss
        }
    }

    pub fn effective_r_ins(&self) -> CovarianceDiag {
        if self.planar() {
            self.r_ins.planar()
        } else {
            self.r_ins
        }
    }

    /// Set one dotted key, e.g. `attack.offset_magnitude`, from a TOML literal.
    /// Bare words that do not parse as TOML are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let literal: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` does not name a config field")))?;
            if k + 1 == parts.len() {
                table.insert(part.to_string(), literal.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("--set {key}={value}: {}", e.message())))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewNodes(self.n));
        }
        if self.f >= self.n {
            return Err(Error::TooManyAttacked { n: self.n, f: self.f });
        }
        if 2 * self.f >= self.n && !self.attack.allow_unsafe {
            return Err(Error::Config(format!(
                "f = {} violates n >= 2f + 1 for n = {}; set attack.allow_unsafe to run it anyway",
                self.f, self.n
            )));
        }
        if self.dimension != 2 && self.dimension != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {}", self.dimension)));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        let finite_pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        let finite_nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        finite_pos("bounding_box", self.bounding_box)?;
        finite_pos("min_separation", self.min_separation)?;
        finite_nonneg("sigma_d", self.sigma_d)?;
        finite_nonneg("attack.offset_magnitude", self.attack.offset_magnitude)?;
        finite_nonneg("attack.drift_magnitude", self.attack.drift_magnitude)?;
        if !self.attack.range_bias.is_finite() || self.attack.fixed_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attack offsets"));
        }
        if let Motion::ConstantVelocity { speed } = self.motion {
            finite_nonneg("motion.speed", speed)?;
        }
        let d = &self.detection;
        if let Some(tau) = d.tau {
            finite_pos("detection.tau", tau)?;
        }
        if let Some(eps) = d.epsilon {
            finite_pos("detection.epsilon", eps)?;
        }
        if let Some(t) = d.residual_threshold {
            finite_nonneg("detection.residual_threshold", t)?;
        }
        finite_pos("detection.step_tol", d.step_tol)?;
        if d.k_max < 1 {
            return Err(Error::Config("detection.k_max must be at least 1".into()));
        }
        if d.min_anchors < 1 {
            return Err(Error::Config("detection.min_anchors must be at least 1".into()));
        }
        if d.needs_calibration() && d.calibration_trials < MIN_CALIBRATION_TRIALS {
            return Err(Error::InsufficientCalibration(d.calibration_trials));
        }
        self.raft.validate()?;
        Ok(())
    }

    /// The same swarm with attacks switched off.
    pub fn honest(&self) -> SwarmConfig {
        SwarmConfig {
            f: 0,
            ..self.clone()
        }
    }

    /// Fill in unset thresholds from an honest calibration seeded by this config.
    pub fn resolve_detection(&self) -> Result<ResolvedDetection> {
        self.validate()?;
        let d = &self.detection;
        let calibration = if d.needs_calibration() {
            let seed = self.seed.derive_path(&[stream::CALIBRATION, self.n as u64]);
            Some(calibrate_threshold(&self.honest(), d.calibration_trials, seed)?)
        } else {
            None
        };
        let calibrated = calibration.as_ref().map(|c| c.threshold);
        let tau = d
            .tau
            .unwrap_or_else(|| calibrated.unwrap_or(MIN_TOLERANCE).max(MIN_TOLERANCE));
        let residual_threshold = if d.residual_detector {
            Some(d.residual_threshold.or(calibrated).unwrap_or(0.0))
        } else {
            None
        };
        let params = DetectionParams {
            tau,
            epsilon: d.epsilon.unwrap_or(tau),
            k_max: d.k_max,
            residual_threshold,
            step_tol: d.step_tol,
            min_anchors: d.min_anchors,
            fallback: d.fallback,
            init: d.init,
        };
        params.validate()?;
        Ok(ResolvedDetection {
            params,
            calibration: calibration.as_ref().map(CalibrationSummary::from),
        })
    }
}
