//! Scripted and randomized crash scenarios over a [`Cluster`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{majority, Cluster, CrashFault, MessageCounters, RaftSettings, Verdict};
use crate::error::{Error, Result};
use crate::random::{stream, Seed};
use crate::sensors::{sample_formation, RangeMatrix};
use crate::verification::{ClientReport, DetectionParams};

/// Crash whichever node leads at `tick`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderCrash {
    pub tick: u64,
    pub duration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub n: usize,
    pub ticks: u64,
    pub seed: Seed,
    pub raft: RaftSettings,
    /// A new round is offered every `round_interval` ticks when none is pending.
    pub round_interval: u64,
    pub crashes: Vec<CrashFault>,
    pub leader_crashes: Vec<LeaderCrash>,
    /// Inject random crashes, never taking down a majority at once.
    pub random_faults: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n: 5,
            ticks: 120,
            seed: Seed(0),
            raft: RaftSettings::default(),
            round_interval: 4,
            crashes: Vec::new(),
            leader_crashes: vec![LeaderCrash {
                tick: 40,
                duration: 30,
            }],
            random_faults: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub ticks: u64,
    /// `(tick, node, term)` for every election won.
    pub elections: Vec<(u64, usize, u64)>,
    pub crashes: Vec<CrashFault>,
    pub rounds_offered: u64,
    pub rounds_committed: u64,
    pub commit_latencies: Vec<u64>,
    pub counters: MessageCounters,
    pub verdict: Verdict,
}

fn static_reports(n: usize, seed: Seed) -> Result<Vec<ClientReport>> {
    let positions = sample_formation(n, true, 200.0, 10.0, &mut seed.stream(&[stream::FORMATION]))?;
    let ranges = RangeMatrix::exact(&positions);
    Ok(positions
        .iter()
        .enumerate()
        .map(|(i, &p)| ClientReport {
            node_id: i,
            reported_position: p,
            ins_estimate: p,
            range_row: (0..n).filter(|&j| j != i).map(|j| (j, ranges.get(i, j))).collect(),
        })
        .collect())
}

/// Run a demo scenario. The returned cluster holds the trace when `trace` is set.
pub fn run_demo(config: &DemoConfig, trace: bool) -> Result<(DemoReport, Cluster)> {
    if config.round_interval == 0 {
        return Err(Error::Config("round_interval must be at least 1".into()));
    }
    let n = config.n;
    let mut cluster = Cluster::new(n, config.raft, DetectionParams::with_tolerance(1e-6), config.seed)?;
    if trace {
        cluster.enable_trace();
    }
    for fault in &config.crashes {
        cluster.schedule(*fault)?;
    }
    let reports = static_reports(n, config.seed)?;
    let mut faults = config.crashes.clone();
    let mut rng = config.seed.stream(&[stream::RAFT, u64::MAX]);
    let spacing = config.raft.election_timeout_max + 6;
    let mut next_random = spacing;
    let mut round = 0;

    while cluster.now() < config.ticks {
        let now = cluster.now();
        for lc in config.leader_crashes.iter().filter(|lc| lc.tick == now + 1) {
            if let Some(leader) = cluster.leader() {
                cluster.crash(leader, lc.duration)?;
                faults.push(CrashFault {
                    node: leader,
                    start: now + 1,
                    duration: lc.duration,
                });
            }
        }
        if config.random_faults && now + 1 >= next_random {
            next_random = now + 1 + spacing + rng.random_range(0..=10);
            let target = match cluster.leader() {
                Some(l) if rng.random_bool(0.6) => l,
                _ => rng.random_range(0..n),
            };
            let alive_after = cluster.alive() - usize::from(!cluster.is_down(target));
            let overlapping = faults
                .iter()
                .any(|f| f.node == target && f.start + f.duration > now + 1);
            if alive_after >= majority(n) && !overlapping {
                let duration = rng.random_range(1..=3 * config.raft.election_timeout_max);
                cluster.crash(target, duration)?;
                faults.push(CrashFault {
                    node: target,
                    start: now + 1,
                    duration,
                });
            }
        }
        if !cluster.has_pending_round() && now % config.round_interval == 0 {
            round += 1;
            cluster.begin_round(round, reports.clone())?;
        }
        cluster.step()?;
    }

    let commit_latencies: Vec<u64> = cluster.commits().map(|c| c.ticks_to_commit()).collect();
    let report = DemoReport {
        ticks: cluster.now(),
        elections: cluster.elections.clone(),
        crashes: faults,
        rounds_offered: round,
        rounds_committed: commit_latencies.len() as u64,
        commit_latencies,
        counters: cluster.counters().clone(),
        verdict: Verdict::evaluate(&cluster),
    };
    Ok((report, cluster))
}

/// A randomized crash scenario for property checking.
pub fn randomized(n: usize, ticks: u64, seed: Seed) -> DemoConfig {
    DemoConfig {
        n,
        ticks,
        seed,
        leader_crashes: Vec::new(),
        random_faults: true,
        ..DemoConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_passes() {
        let (report, _) = run_demo(&DemoConfig::default(), false).unwrap();
        assert!(report.verdict.passed, "{:?}", report.verdict.violations);
        assert!(report.elections.len() >= 2);
        assert!(report.rounds_committed > 10);
        assert!(report.verdict.reelections.iter().any(|r| r.applicable));
    }

    #[test]
    fn majority_outage_stalls_commits() {
        let config = DemoConfig {
            n: 5,
            ticks: 100,
            leader_crashes: vec![],
            crashes: (0..3)
                .map(|node| CrashFault {
                    node,
                    start: 30,
                    duration: 40,
                })
                .collect(),
            ..DemoConfig::default()
        };
        let (report, cluster) = run_demo(&config, false).unwrap();
        assert!(report.verdict.passed, "{:?}", report.verdict.violations);
        let stalled = cluster
            .commits()
            .filter(|c| c.committed_at >= 33 && c.committed_at < 70)
            .count();
        assert_eq!(stalled, 0);
        assert!(cluster.commits().any(|c| c.committed_at > 70));
    }

    #[test]
    fn random_scenarios_pass() {
        for s in 0..20 {
            let (report, _) = run_demo(&randomized(5, 200, Seed(s)), false).unwrap();
            assert!(report.verdict.passed, "seed {s}: {:?}", report.verdict.violations);
        }
    }
}
