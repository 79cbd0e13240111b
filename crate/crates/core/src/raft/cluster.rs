use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Envelope, FinalizedRound, Message, RaftNode, RaftRole, RaftSettings};
use crate::error::{Error, Result};
use crate::export::write_atomic;
use crate::random::{stream, Seed};
use crate::verification::{ranges_from_reports, verify_and_recover, ClientReport, DetectionParams};

/// A node is down for ticks `start .. start + duration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashFault {
    pub node: usize,
    pub start: u64,
    pub duration: u64,
}

impl CrashFault {
    pub fn covers(&self, tick: u64) -> bool {
        tick >= self.start && tick < self.start + self.duration
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageCounters {
    pub sent: BTreeMap<String, u64>,
    pub delivered: u64,
    pub dropped: u64,
}

impl MessageCounters {
    pub fn total_sent(&self) -> u64 {
        self.sent.values().sum()
    }

    pub fn sent_of(&self, kind: &str) -> u64 {
        self.sent.get(kind).copied().unwrap_or(0)
    }
}

/// A round result once the leader has committed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundCommit {
    pub finalized: FinalizedRound,
    pub leader: usize,
    pub term: u64,
    pub begun_at: u64,
    pub committed_at: u64,
    /// Client reports the committing leader received over the network.
    pub reports_received: u64,
    pub finalize_sent: u64,
}

impl RoundCommit {
    pub fn ticks_to_commit(&self) -> u64 {
        self.committed_at - self.begun_at
    }

    /// Round-specific messages handled by the leader.
    pub fn leader_messages(&self) -> u64 {
        self.reports_received + self.finalize_sent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Send {
        tick: u64,
        from: usize,
        to: usize,
        kind: String,
        term: Option<u64>,
    },
    Role {
        tick: u64,
        node: usize,
        term: u64,
        role: RaftRole,
    },
    Crash {
        tick: u64,
        node: usize,
    },
    Resume {
        tick: u64,
        node: usize,
    },
    Commit {
        tick: u64,
        node: usize,
        index: usize,
        term: u64,
        round: Option<u64>,
    },
}

#[derive(Debug, Clone)]
struct Collection {
    leader: usize,
    started: u64,
    reports: BTreeMap<usize, ClientReport>,
    received: u64,
}

#[derive(Debug, Clone)]
struct PendingRound {
    round: u64,
    begun_at: u64,
    reports: Vec<ClientReport>,
    sent_to: Vec<Option<usize>>,
    collection: Option<Collection>,
}

/// Lockstep network of [`RaftNode`]s that also carries the per-round report flow.
#[derive(Debug, Clone)]
pub struct Cluster {
    nodes: Vec<RaftNode>,
    settings: RaftSettings,
    params: DetectionParams,
    now: u64,
    in_flight: Vec<Envelope>,
    faults: Vec<CrashFault>,
    down: Vec<bool>,
    pending: Option<PendingRound>,
    commits: BTreeMap<u64, RoundCommit>,
    committed_terms: Vec<u64>,
    counters: MessageCounters,
    trace: Option<Vec<TraceEvent>>,
    pub(super) leaders: BTreeMap<u64, BTreeSet<usize>>,
    pub(super) elections: Vec<(u64, usize, u64)>,
    pub(super) leader_crashes: Vec<(u64, usize, u64)>,
    pub(super) violations: Vec<String>,
    /// Alive-node count at each tick; index 0 is before the first tick.
    pub(super) alive_history: Vec<usize>,
    /// Ticks at which the cluster-wide commit index advanced.
    pub(super) commit_ticks: Vec<u64>,
}

impl Cluster {
    pub fn new(n: usize, settings: RaftSettings, params: DetectionParams, seed: Seed) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        settings.validate()?;
        params.validate()?;
        let nodes = (0..n)
            .map(|i| RaftNode::new(i, n, settings, seed.derive_path(&[stream::RAFT, i as u64])))
            .collect();
        Ok(Self {
            nodes,
            settings,
            params,
            now: 0,
            in_flight: Vec::new(),
            faults: Vec::new(),
            down: vec![false; n],
            pending: None,
            commits: BTreeMap::new(),
            committed_terms: Vec::new(),
            counters: MessageCounters::default(),
            trace: None,
            leaders: BTreeMap::new(),
            elections: Vec::new(),
            leader_crashes: Vec::new(),
            violations: Vec::new(),
            alive_history: vec![n],
            commit_ticks: Vec::new(),
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn write_trace_jsonl(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        for event in self.trace() {
            serde_json::to_writer(&mut buf, event)?;
            buf.push(b'\n');
        }
        write_atomic(path, |w| w.write_all(&buf))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn settings(&self) -> RaftSettings {
        self.settings
    }

    pub fn nodes(&self) -> &[RaftNode] {
        &self.nodes
    }

    pub fn counters(&self) -> &MessageCounters {
        &self.counters
    }

    pub fn is_down(&self, node: usize) -> bool {
        self.down[node]
    }

    pub fn alive(&self) -> usize {
        self.down.iter().filter(|d| !**d).count()
    }

    /// The highest-term live leader, if any.
    pub fn leader(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter(|n| n.is_leader() && !self.down[n.id])
            .max_by_key(|n| n.current_term)
            .map(|n| n.id)
    }

    pub fn commit(&self, round: u64) -> Option<&RoundCommit> {
        self.commits.get(&round)
    }

    pub fn commits(&self) -> impl Iterator<Item = &RoundCommit> {
        self.commits.values()
    }

    pub fn has_pending_round(&self) -> bool {
        self.pending.is_some()
    }

    /// Take `node` down from the next tick for `duration` ticks.
    pub fn crash(&mut self, node: usize, duration: u64) -> Result<()> {
        self.schedule(CrashFault {
            node,
            start: self.now + 1,
            duration,
        })
    }

    pub fn schedule(&mut self, fault: CrashFault) -> Result<()> {
        if fault.node >= self.nodes.len() {
            return Err(Error::UnknownNode {
                id: fault.node,
                n: self.nodes.len(),
            });
        }
        self.faults.push(fault);
        Ok(())
    }

    /// Start collecting one report per node for `round`.
    pub fn begin_round(&mut self, round: u64, reports: Vec<ClientReport>) -> Result<()> {
        let n = self.nodes.len();
        if reports.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: reports.len(),
            });
        }
        if let Some(p) = &self.pending {
            return Err(Error::Config(format!("round {} is still pending", p.round)));
        }
        let mut reports = reports;
        reports.sort_by_key(|r| r.node_id);
        if reports.iter().enumerate().any(|(i, r)| r.node_id != i) {
            return Err(Error::Config("reports must carry node ids 0..n".into()));
        }
        self.pending = Some(PendingRound {
            round,
            begun_at: self.now + 1,
            reports,
            sent_to: vec![None; n],
            collection: None,
        });
        Ok(())
    }

    /// Step until some live node leads, or fail after `max_ticks`.
    pub fn elect(&mut self, max_ticks: u64) -> Result<usize> {
        for _ in 0..max_ticks {
            if let Some(l) = self.leader() {
                return Ok(l);
            }
            self.step()?;
        }
        self.leader().ok_or(Error::NoQuorum(0))
    }

    /// Submit `reports` for `round` and step until the round commits.
    pub fn run_round(&mut self, round: u64, reports: Vec<ClientReport>, max_ticks: u64) -> Result<RoundCommit> {
        self.begin_round(round, reports)?;
        for _ in 0..max_ticks {
            self.step()?;
            if let Some(c) = self.commits.get(&round) {
                return Ok(c.clone());
            }
        }
        Err(Error::NoQuorum(round))
    }

    pub fn run_ticks(&mut self, ticks: u64) -> Result<()> {
        for _ in 0..ticks {
            self.step()?;
        }
        Ok(())
    }

    fn record(&mut self, event: TraceEvent) {
        if let Some(trace) = &mut self.trace {
            trace.push(event);
        }
    }

    /// Advance the whole cluster by one tick.
    pub fn step(&mut self) -> Result<()> {
        let t = self.now + 1;
        let n = self.nodes.len();

        for i in 0..n {
            let down = self.faults.iter().any(|f| f.node == i && f.covers(t));
            if down && !self.down[i] {
                if self.nodes[i].is_leader() {
                    self.leader_crashes.push((t, i, self.nodes[i].current_term));
                }
                self.record(TraceEvent::Crash { tick: t, node: i });
            } else if !down && self.down[i] {
                self.nodes[i].resume();
                self.record(TraceEvent::Resume { tick: t, node: i });
            }
            self.down[i] = down;
        }
        self.alive_history.push(self.alive());

        let mut inboxes: Vec<Vec<Envelope>> = vec![Vec::new(); n];
        for env in std::mem::take(&mut self.in_flight) {
            if self.down[env.to] {
                self.counters.dropped += 1;
            } else {
                self.counters.delivered += 1;
                inboxes[env.to].push(env);
            }
        }

        let mut outbox = Vec::new();
        self.send_reports(t, &mut outbox);

        for (i, slot) in inboxes.iter_mut().enumerate() {
            if self.down[i] {
                continue;
            }
            let inbox = std::mem::take(slot);
            self.collect_reports(i, &inbox);
            self.maybe_submit(i, t)?;
            let before = (self.nodes[i].role, self.nodes[i].current_term);
            let out = self.nodes[i].tick(&inbox, t);
            let after = (self.nodes[i].role, self.nodes[i].current_term);
            if before.0 != after.0 {
                self.record(TraceEvent::Role {
                    tick: t,
                    node: i,
                    term: after.1,
                    role: after.0,
                });
                if after.0 == RaftRole::Leader {
                    self.on_elected(i, t);
                }
            }
            outbox.extend(out);
        }

        self.observe_commits(t, &mut outbox);

        for env in &outbox {
            *self.counters.sent.entry(env.message.kind().to_string()).or_insert(0) += 1;
        }
        if self.trace.is_some() {
            for env in &outbox {
                self.record(TraceEvent::Send {
                    tick: t,
                    from: env.from,
                    to: env.to,
                    kind: env.message.kind().to_string(),
                    term: env.message.term(),
                });
            }
        }
        self.in_flight = outbox;
        self.now = t;
        Ok(())
    }

    fn send_reports(&mut self, t: u64, outbox: &mut Vec<Envelope>) {
        let Some(p) = &mut self.pending else {
            return;
        };
        for i in 0..self.nodes.len() {
            if self.down[i] {
                continue;
            }
            let Some(target) = self.nodes[i].leader_hint() else {
                continue;
            };
            if p.sent_to[i] == Some(target) {
                continue;
            }
            p.sent_to[i] = Some(target);
            if target == i {
                let own = p.reports[i].clone();
                collection_for(p, i, t).reports.insert(i, own);
            } else {
                outbox.push(Envelope {
                    from: i,
                    to: target,
                    tick: t,
                    message: Message::ClientReport {
                        round: p.round,
                        report: p.reports[i].clone(),
                    },
                });
            }
        }
    }

    fn collect_reports(&mut self, i: usize, inbox: &[Envelope]) {
        if !self.nodes[i].is_leader() {
            return;
        }
        let Some(p) = &mut self.pending else {
            return;
        };
        for env in inbox {
            if let Message::ClientReport { round, report } = &env.message {
                if *round == p.round {
                    let c = collection_for(p, i, env.tick + 1);
                    c.received += 1;
                    c.reports.insert(report.node_id, report.clone());
                }
            }
        }
    }

    fn maybe_submit(&mut self, i: usize, t: u64) -> Result<()> {
        if !self.nodes[i].is_leader() {
            return Ok(());
        }
        let Some(p) = &mut self.pending else {
            return Ok(());
        };
        if self.nodes[i].has_round(p.round) {
            return Ok(());
        }
        let own = p.reports[i].clone();
        let Some(c) = &mut p.collection else {
            return Ok(());
        };
        if c.leader != i {
            return Ok(());
        }
        c.reports.entry(i).or_insert(own);
        if c.reports.len() < 2 {
            return Ok(());
        }
        // Wait for everyone, but no longer than one round trip after the leader's own report.
        if c.reports.len() < self.nodes.len() && t < c.started + 2 {
            return Ok(());
        }
        let reports: Vec<ClientReport> = c.reports.values().cloned().collect();
        let round = p.round;
        submit_round(&mut self.nodes[i], round, &reports, &self.params)?;
        Ok(())
    }

    fn on_elected(&mut self, i: usize, t: u64) {
        let term = self.nodes[i].current_term;
        self.leaders.entry(term).or_default().insert(i);
        self.elections.push((t, i, term));
        for (k, &committed) in self.committed_terms.iter().enumerate() {
            if self.nodes[i].entry(k + 1).map(|e| e.term) != Some(committed) {
                self.violations.push(format!(
                    "leader {i} of term {term} elected at tick {t} lacks committed entry {}",
                    k + 1
                ));
            }
        }
    }

    fn observe_commits(&mut self, t: u64, outbox: &mut Vec<Envelope>) {
        let before = self.committed_terms.len();
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            for index in 1..=node.commit_index {
                let term = node.log[index - 1].term;
                match self.committed_terms.get(index - 1) {
                    Some(&known) if known != term => self.violations.push(format!(
                        "index {index} committed with terms {known} and {term}"
                    )),
                    Some(_) => {}
                    None => self.committed_terms.push(term),
                }
            }
        }
        for index in before + 1..=self.committed_terms.len() {
            let term = self.committed_terms[index - 1];
            let holders = self
                .nodes
                .iter()
                .filter(|nd| nd.entry(index).is_some_and(|e| e.term == term))
                .count();
            if holders < super::majority(self.nodes.len()) {
                self.violations
                    .push(format!("index {index} committed while held by only {holders} nodes"));
            }
        }
        if self.committed_terms.len() > before {
            self.commit_ticks.push(t);
            if self.trace.is_some() {
                let leader = self.leader().unwrap_or(0);
                for index in before + 1..=self.committed_terms.len() {
                    let round = self
                        .nodes
                        .iter()
                        .find_map(|nd| nd.entry(index).filter(|_| nd.commit_index >= index))
                        .and_then(|e| e.payload.as_ref().map(|p| p.round));
                    self.record(TraceEvent::Commit {
                        tick: t,
                        node: leader,
                        index,
                        term: self.committed_terms[index - 1],
                        round,
                    });
                }
            }
        }

        let Some(p) = &self.pending else {
            return;
        };
        let round = p.round;
        let Some(leader) = self.leader() else {
            return;
        };
        let node = &self.nodes[leader];
        let Some(finalized) = node.log[..node.commit_index]
            .iter()
            .find_map(|e| e.payload.as_ref().filter(|f| f.round == round))
            .cloned()
        else {
            return;
        };
        let term = node.current_term;
        let mut finalize_sent = 0;
        for peer in 0..self.nodes.len() {
            if peer == leader {
                continue;
            }
            outbox.push(Envelope {
                from: leader,
                to: peer,
                tick: t,
                message: Message::FinalizedBroadcast { term, round },
            });
            finalize_sent += 1;
        }
        let received = p
            .collection
            .as_ref()
            .filter(|c| c.leader == leader)
            .map_or(0, |c| c.received);
        self.commits.insert(
            round,
            RoundCommit {
                finalized,
                leader,
                term,
                begun_at: p.begun_at,
                committed_at: t,
                reports_received: received,
                finalize_sent,
            },
        );
        self.pending = None;
    }
}

fn collection_for(p: &mut PendingRound, leader: usize, started: u64) -> &mut Collection {
    let stale = p.collection.as_ref().is_none_or(|c| c.leader != leader);
    if stale {
        p.collection = Some(Collection {
            leader,
            started,
            reports: BTreeMap::new(),
            received: 0,
        });
        // Anyone who reported to an earlier leader must report again.
        for (i, s) in p.sent_to.iter_mut().enumerate() {
            if *s != Some(leader) && i != leader {
                *s = None;
            }
        }
    }
    p.collection.as_mut().expect("collection just set")
}

/// Verify `reports` on the leader and append the result to its log.
pub fn submit_round(
    leader: &mut RaftNode,
    round: u64,
    reports: &[ClientReport],
    params: &DetectionParams,
) -> Result<FinalizedRound> {
    if !leader.is_leader() {
        return Err(Error::NotLeader);
    }
    let ranges = ranges_from_reports(reports)?;
    let ins: Vec<_> = reports.iter().map(|r| r.ins_estimate).collect();
    let v = verify_and_recover(reports, &ranges, &ins, params)?;
    let finalized = FinalizedRound {
        round,
        outcomes: v.outcomes,
        tallies: v.tallies,
        leader_ops: v.leader_ops,
        solver_evaluations: v.solver_evaluations,
    };
    leader.append_round(finalized.clone())?;
    Ok(finalized)
}
