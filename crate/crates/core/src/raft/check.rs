use serde::{Deserialize, Serialize};

use super::{majority, Cluster, RaftNode};

/// How long the cluster took to replace a crashed leader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReelectionCheck {
    pub crash_tick: u64,
    pub crashed_leader: usize,
    pub elected_tick: Option<u64>,
    pub bound: u64,
    /// False when a majority was not alive for the whole window, or the run
    /// ended before the window closed.
    pub applicable: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub election_safety: bool,
    pub log_matching: bool,
    pub leader_completeness: bool,
    pub durable_commits: bool,
    pub reelections: Vec<ReelectionCheck>,
    pub violations: Vec<String>,
    pub passed: bool,
}

impl Verdict {
    pub fn evaluate(cluster: &Cluster) -> Verdict {
        let mut violations = Vec::new();

        let mut election_safety = true;
        for (term, leaders) in &cluster.leaders {
            if leaders.len() > 1 {
                election_safety = false;
                violations.push(format!("term {term} has leaders {leaders:?}"));
            }
        }

        let log_matching = match check_log_matching(cluster.nodes()) {
            Ok(()) => true,
            Err(e) => {
                violations.push(e);
                false
            }
        };

        let leader_completeness = !cluster.violations.iter().any(|v| v.contains("lacks committed"));
        let durable_commits = !cluster.violations.iter().any(|v| !v.contains("lacks committed"));
        violations.extend(cluster.violations.iter().cloned());

        let bound = cluster.settings().election_timeout_max + 2;
        let need = majority(cluster.len());
        let reelections: Vec<ReelectionCheck> = cluster
            .leader_crashes
            .iter()
            .map(|&(crash_tick, crashed_leader, _)| {
                let window_end = crash_tick + bound;
                let fits = window_end <= cluster.now();
                let quorate = (crash_tick..=window_end.min(cluster.now()))
                    .all(|t| cluster.alive_history.get(t as usize).is_some_and(|&a| a >= need));
                let elected_tick = cluster
                    .elections
                    .iter()
                    .find(|&&(t, _, _)| t > crash_tick)
                    .map(|&(t, _, _)| t);
                let applicable = fits && quorate;
                let ok = !applicable || elected_tick.is_some_and(|e| e - crash_tick <= bound);
                ReelectionCheck {
                    crash_tick,
                    crashed_leader,
                    elected_tick,
                    bound,
                    applicable,
                    ok,
                }
            })
            .collect();
        for r in reelections.iter().filter(|r| !r.ok) {
            violations.push(format!(
                "leader {} crashed at tick {} and was not replaced within {} ticks",
                r.crashed_leader, r.crash_tick, r.bound
            ));
        }

        let passed = election_safety
            && log_matching
            && leader_completeness
            && durable_commits
            && reelections.iter().all(|r| r.ok);
        Verdict {
            election_safety,
            log_matching,
            leader_completeness,
            durable_commits,
            reelections,
            violations,
            passed,
        }
    }
}

/// If two logs hold an entry with the same index and term, the logs agree on
/// every entry up to that index.
pub fn check_log_matching(nodes: &[RaftNode]) -> Result<(), String> {
    for a in nodes {
        for b in nodes.iter().filter(|b| b.id > a.id) {
            let common = a.log.len().min(b.log.len());
            let Some(last_match) = (0..common).rev().find(|&k| a.log[k].term == b.log[k].term) else {
                continue;
            };
            if a.log[..=last_match] != b.log[..=last_match] {
                return Err(format!(
                    "nodes {} and {} share index {} and term but differ before it",
                    a.id,
                    b.id,
                    last_match + 1
                ));
            }
        }
    }
    Ok(())
}
