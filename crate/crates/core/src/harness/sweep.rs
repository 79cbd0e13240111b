use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial_with, SwarmConfig, TrialResult};
use crate::error::{Error, Result};
use crate::random::stream;
use crate::verification::DetectionParams;

/// Order statistics with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Result<Stats> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("statistics input"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (sorted.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        let (q1, q3) = (q(0.25), q(0.75));
        Ok(Stats {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: q(0.5),
            q1,
            q3,
            iqr: q3 - q1,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Aggregates for one `(n, f)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub f: usize,
    pub trials: usize,
    pub tau: f64,
    pub baseline: Stats,
    pub recovered: Stats,
    pub attacked_baseline: Option<Stats>,
    pub attacked_recovered: Option<Stats>,
    pub honest_recovered: Option<Stats>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Trials whose flagged set equals the attacked set.
    pub exact_detection_rate: f64,
    /// Trials with `recovered_mae <= baseline_mae`.
    pub dominance_rate: f64,
    pub leader_ops_mean: f64,
    pub node_ops_mean: f64,
    pub solver_evaluations_mean: f64,
    pub messages_mean: Option<f64>,
}

impl CellSummary {
    pub fn from_trials(n: usize, f: usize, tau: f64, trials: &[TrialResult]) -> Result<CellSummary> {
        let count = trials.len() as f64;
        let stats = |get: &dyn Fn(&TrialResult) -> f64| Stats::from_values(&trials.iter().map(get).collect::<Vec<_>>());
        let opt_stats = |get: &dyn Fn(&TrialResult) -> Option<f64>| -> Result<Option<Stats>> {
            let v: Vec<f64> = trials.iter().filter_map(get).collect();
            if v.is_empty() {
                Ok(None)
            } else {
                Stats::from_values(&v).map(Some)
            }
        };
        let mean = |get: &dyn Fn(&TrialResult) -> f64| trials.iter().map(get).sum::<f64>() / count;
        let messages: Vec<f64> = trials.iter().filter_map(|t| t.messages.map(|m| m as f64)).collect();
        Ok(CellSummary {
            n,
            f,
            trials: trials.len(),
            tau,
            baseline: stats(&|t| t.baseline_mae)?,
            recovered: stats(&|t| t.recovered_mae)?,
            attacked_baseline: opt_stats(&|t| t.attacked_baseline_mae)?,
            attacked_recovered: opt_stats(&|t| t.attacked_recovered_mae)?,
            honest_recovered: opt_stats(&|t| t.honest_recovered_mae)?,
            tp: trials.iter().map(|t| t.true_positive_flags as u64).sum(),
            fp: trials.iter().map(|t| t.false_positive_flags as u64).sum(),
            fn_: trials.iter().map(|t| t.false_negative_flags as u64).sum(),
            exact_detection_rate: mean(&|t| f64::from(t.false_positive_flags == 0 && t.false_negative_flags == 0)),
            dominance_rate: mean(&|t| f64::from(t.recovered_mae <= t.baseline_mae)),
            leader_ops_mean: mean(&|t| t.leader_ops as f64),
            node_ops_mean: mean(&|t| t.node_ops as f64),
            solver_evaluations_mean: mean(&|t| t.solver_evaluations as f64),
            messages_mean: (!messages.is_empty()).then(|| messages.iter().sum::<f64>() / messages.len() as f64),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// The base configuration every cell was derived from.
    pub config: SwarmConfig,
    pub cells: Vec<CellSummary>,
}

/// Summary plus every per-trial row, sorted by `(n, f, trial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub summary: SweepSummary,
    pub trials: Vec<TrialResult>,
}

fn cell_config(base: &SwarmConfig, n: usize, f: usize) -> SwarmConfig {
    let mut c = base.clone();
    c.n = n;
    c.f = f;
    if 2 * f >= n {
        c.attack.allow_unsafe = true;
    }
    c
}

fn in_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(work()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

/// Run `trials` trials for every listed cell. Trial `t` of cell `(n, f)` uses
/// the seed `base.seed / TRIAL / n / f / t`, so results do not depend on `jobs`.
pub fn run_cells(base: &SwarmConfig, cells: &[(usize, usize)], trials: usize, jobs: Option<usize>) -> Result<SweepRun> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    for &(n, f) in cells {
        cell_config(base, n, f).validate()?;
    }
    in_pool(jobs, || {
        let mut sizes: Vec<usize> = cells.iter().map(|&(n, _)| n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let detection: BTreeMap<usize, DetectionParams> = sizes
            .par_iter()
            .map(|&n| Ok((n, cell_config(base, n, 0).resolve_detection()?.params)))
            .collect::<Result<_>>()?;

        let work: Vec<(usize, usize, usize)> = cells
            .iter()
            .flat_map(|&(n, f)| (0..trials).map(move |t| (n, f, t)))
            .collect();
        let results: Vec<TrialResult> = work
            .par_iter()
            .map(|&(n, f, t)| {
                let config = cell_config(base, n, f);
                let seed = base.seed.derive_path(&[stream::TRIAL, n as u64, f as u64, t as u64]);
                run_trial_with(&config, &detection[&n], seed, t)
            })
            .collect::<Result<_>>()?;

        let summaries = cells
            .iter()
            .enumerate()
            .map(|(k, &(n, f))| CellSummary::from_trials(n, f, detection[&n].tau, &results[k * trials..(k + 1) * trials]))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepRun {
            summary: SweepSummary {
                config: base.clone(),
                cells: summaries,
            },
            trials: results,
        })
    })?
}

/// Full factorial sweep; cells with `f >= n` are skipped.
pub fn grid_sweep(base: &SwarmConfig, ns: &[usize], fs: &[usize], trials: usize, jobs: Option<usize>) -> Result<SweepRun> {
    let cells: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| fs.iter().filter(move |&&f| f < n).map(move |&f| (n, f)))
        .collect();
    run_cells(base, &cells, trials, jobs)
}

/// For each `f`, run the minimal safe swarm `n = 2f + 1`.
pub fn scaling_experiment(base: &SwarmConfig, fs: &[usize], trials: usize, jobs: Option<usize>) -> Result<SweepRun> {
    if fs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cells: Vec<(usize, usize)> = fs.iter().map(|&f| (2 * f + 1, f)).collect();
    run_cells(base, &cells, trials, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_sample() {
        let s = Stats::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.q1, 2.0);
        assert_eq!(s.q3, 4.0);
        assert_eq!(s.iqr, 2.0);
        assert_eq!((s.min, s.max), (1.0, 5.0));
        let even = Stats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(even.median, 2.5);
        assert_eq!(even.q1, 1.75);
        assert!(Stats::from_values(&[]).is_err());
    }

    #[test]
    fn single_trial_summary_equals_trial() {
        let base = SwarmConfig::default();
        let run = grid_sweep(&base, &[5], &[1], 1, Some(1)).unwrap();
        let cell = &run.summary.cells[0];
        let t = &run.trials[0];
        assert_eq!(cell.recovered.mean, t.recovered_mae);
        assert_eq!(cell.recovered.median, t.recovered_mae);
        assert_eq!(cell.recovered.iqr, 0.0);
        assert_eq!(cell.baseline.min, t.baseline_mae);
    }

    #[test]
    fn grid_skips_impossible_cells_and_sorts() {
        let run = grid_sweep(&SwarmConfig::default(), &[3, 5], &[1, 2, 3], 2, Some(2)).unwrap();
        let cells: Vec<(usize, usize)> = run.summary.cells.iter().map(|c| (c.n, c.f)).collect();
        assert_eq!(cells, vec![(3, 1), (3, 2), (5, 1), (5, 2), (5, 3)]);
        let keys: Vec<(usize, usize, usize)> = run.trials.iter().map(|t| (t.n, t.f, t.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn independent_of_thread_count() {
        let base = SwarmConfig::default();
        let a = grid_sweep(&base, &[5, 7], &[1, 2], 6, Some(1)).unwrap();
        let b = grid_sweep(&base, &[5, 7], &[1, 2], 6, Some(4)).unwrap();
        assert_eq!(a, b);
    }
}
