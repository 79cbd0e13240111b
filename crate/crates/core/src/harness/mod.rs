//! Round pipeline, Monte Carlo trials and parameter sweeps.

mod config;
mod snapshot;
mod sweep;
mod trial;
mod world;

pub use config::{CalibrationSummary, DetectionConfig, ResolvedDetection, SwarmConfig, MIN_TOLERANCE};
pub use snapshot::{snapshot_round, NodeRecord, Snapshot};
pub use sweep::{grid_sweep, run_cells, scaling_experiment, CellSummary, Stats, SweepRun, SweepSummary};
pub use trial::{run_trial, run_trial_with, TrialResult};
pub use world::{run_round, RoundRecord, SensedRound, Simulation, World};
