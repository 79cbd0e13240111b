//! A small Raft over a lockstep, loss-free network.
//!
//! Covers leader election, heartbeats, one log entry per simulation round and
//! majority commit. There is no compaction, snapshotting or membership change.
//!
//! Every envelope sent at tick `t` is delivered at tick `t + 1` unless the
//! receiver is crashed at that moment. Nodes are stepped in id order and every
//! inbox is processed in sender order, so a run is a pure function of its seed.

mod check;
mod cluster;
pub mod demo;
mod node;

use serde::{Deserialize, Serialize};

use crate::verification::{ClientReport, VerificationOutcome, VoteTally};

pub use check::{check_log_matching, Verdict};
pub use cluster::{submit_round, Cluster, CrashFault, MessageCounters, RoundCommit, TraceEvent};
pub use node::RaftNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaftRole {
    Follower,
    Candidate,
    Leader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaftSettings {
    /// Election timeouts are drawn uniformly from `[min, max]` ticks.
    pub election_timeout_min: u64,
    pub election_timeout_max: u64,
}

impl Default for RaftSettings {
    fn default() -> Self {
        Self {
            election_timeout_min: 4,
            election_timeout_max: 8,
        }
    }
}

impl RaftSettings {
    pub fn validate(&self) -> crate::Result<()> {
        if self.election_timeout_min < 2 || self.election_timeout_min > self.election_timeout_max {
            return Err(crate::Error::Config(format!(
                "election timeout range [{}, {}] must satisfy 2 <= min <= max",
                self.election_timeout_min, self.election_timeout_max
            )));
        }
        Ok(())
    }
}

/// The leader's verified result for one simulation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizedRound {
    pub round: u64,
    pub outcomes: Vec<VerificationOutcome>,
    pub tallies: Vec<VoteTally>,
    pub leader_ops: u64,
    pub solver_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub term: u64,
    /// `None` for the no-op a new leader appends to commit earlier terms.
    pub payload: Option<FinalizedRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    RequestVote {
        term: u64,
        last_log_index: usize,
        last_log_term: u64,
    },
    VoteGranted {
        term: u64,
    },
    AppendEntries {
        term: u64,
        prev_log_index: usize,
        prev_log_term: u64,
        entries: Vec<LogEntry>,
        leader_commit: usize,
    },
    AppendAck {
        term: u64,
        success: bool,
        match_index: usize,
    },
    ClientReport {
        round: u64,
        report: ClientReport,
    },
    FinalizedBroadcast {
        term: u64,
        round: u64,
    },
}

impl Message {
    pub fn term(&self) -> Option<u64> {
        match *self {
            Message::RequestVote { term, .. }
            | Message::VoteGranted { term }
            | Message::AppendEntries { term, .. }
            | Message::AppendAck { term, .. }
            | Message::FinalizedBroadcast { term, .. } => Some(term),
            Message::ClientReport { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::RequestVote { .. } => "request_vote",
            Message::VoteGranted { .. } => "vote_granted",
            Message::AppendEntries { .. } => "append_entries",
            Message::AppendAck { .. } => "append_ack",
            Message::ClientReport { .. } => "client_report",
            Message::FinalizedBroadcast { .. } => "finalized_broadcast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: usize,
    pub to: usize,
    /// Tick at which the envelope was sent.
    pub tick: u64,
    pub message: Message,
}

pub fn majority(n: usize) -> usize {
    n / 2 + 1
}
