use serde::{Deserialize, Serialize};

use super::{RoundRecord, Simulation, SwarmConfig};
use crate::error::Result;
use crate::geometry::{mean_absolute_error, Position};
use crate::random::Seed;
use crate::verification::DetectionParams;

/// Scores of one trial, taken from its final round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub n: usize,
    pub f: usize,
    pub trial: usize,
    /// MAE of the raw reports over all nodes.
    pub baseline_mae: f64,
    /// MAE of the verified positions over all nodes.
    pub recovered_mae: f64,
    pub attacked_baseline_mae: Option<f64>,
    pub attacked_recovered_mae: Option<f64>,
    pub honest_recovered_mae: Option<f64>,
    pub true_positive_flags: usize,
    pub false_positive_flags: usize,
    pub false_negative_flags: usize,
    pub leader_ops: u64,
    pub solver_evaluations: u64,
    pub node_ops: u64,
    pub messages: Option<u64>,
    pub ticks_to_commit: Option<u64>,
}

fn subset_mae(estimates: &[Position], truths: &[Position], keep: impl Fn(usize) -> bool) -> Result<Option<f64>> {
    let (e, t): (Vec<Position>, Vec<Position>) = estimates
        .iter()
        .zip(truths)
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, (e, t))| (*e, *t))
        .unzip();
    if e.is_empty() {
        return Ok(None);
    }
    mean_absolute_error(&e, &t).map(Some)
}

impl TrialResult {
    pub fn from_round(n: usize, f: usize, trial: usize, record: &RoundRecord) -> Result<Self> {
        let truths: Vec<Position> = record.states.iter().map(|s| s.true_position).collect();
        let reported: Vec<Position> = record.states.iter().map(|s| s.gnss_reading).collect();
        let mut recovered = vec![Position::ORIGIN; record.states.len()];
        let mut flagged = vec![false; record.states.len()];
        for o in &record.outcomes {
            recovered[o.node_id] = o.verified_position;
            flagged[o.node_id] = o.faulty;
        }
        let attacked: Vec<bool> = record.states.iter().map(|s| s.is_attacked).collect();
        let count = |pred: &dyn Fn(usize) -> bool| (0..attacked.len()).filter(|&i| pred(i)).count();
        Ok(TrialResult {
            n,
            f,
            trial,
            baseline_mae: mean_absolute_error(&reported, &truths)?,
            recovered_mae: mean_absolute_error(&recovered, &truths)?,
            attacked_baseline_mae: subset_mae(&reported, &truths, |i| attacked[i])?,
            attacked_recovered_mae: subset_mae(&recovered, &truths, |i| attacked[i])?,
            honest_recovered_mae: subset_mae(&recovered, &truths, |i| !attacked[i])?,
            true_positive_flags: count(&|i| attacked[i] && flagged[i]),
            false_positive_flags: count(&|i| !attacked[i] && flagged[i]),
            false_negative_flags: count(&|i| attacked[i] && !flagged[i]),
            leader_ops: record.leader_ops,
            solver_evaluations: record.solver_evaluations,
            node_ops: record.node_ops,
            messages: record.messages,
            ticks_to_commit: record.ticks_to_commit,
        })
    }
}

/// Run `config.rounds` rounds with already resolved detection parameters.
pub fn run_trial_with(config: &SwarmConfig, params: &DetectionParams, seed: Seed, trial: usize) -> Result<TrialResult> {
    let mut sim = Simulation::new(config, params.clone(), seed)?;
    let mut last = sim.run_round()?;
    for _ in 1..config.rounds {
        last = sim.run_round()?;
    }
    TrialResult::from_round(config.n, config.f, trial, &last)
}

/// Resolve detection from `config` (calibrating if needed) and run one trial.
pub fn run_trial(config: &SwarmConfig, seed: Seed) -> Result<TrialResult> {
    let params = config.resolve_detection()?.params;
    run_trial_with(config, &params, seed, 0)
}
