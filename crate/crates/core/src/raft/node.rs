use std::collections::BTreeSet;

use rand::Rng;

use super::{majority, Envelope, FinalizedRound, LogEntry, Message, RaftRole, RaftSettings};
use crate::error::{Error, Result};
use crate::random::{Seed, SimRng};

/// One replica's Raft state.
///
/// A fresh candidate defers its self-vote by one tick. If a same-term
/// candidate with a lower id asks for its vote in that tick, it grants that
/// vote instead and returns to follower. Simultaneous candidacies therefore
/// resolve to the lowest id in one round trip, and `voted_for` is still set
/// at most once per term.
#[derive(Debug, Clone)]
pub struct RaftNode {
    pub id: usize,
    cluster_size: usize,
    pub current_term: u64,
    pub voted_for: Option<usize>,
    pub role: RaftRole,
    pub log: Vec<LogEntry>,
    /// Index (1-based) of the highest committed entry; 0 when none.
    pub commit_index: usize,
    pub election_timeout: u64,
    elapsed: u64,
    leader_hint: Option<usize>,
    votes: BTreeSet<usize>,
    self_vote_pending: bool,
    next_index: Vec<usize>,
    match_index: Vec<usize>,
    settings: RaftSettings,
    rng: SimRng,
}

impl RaftNode {
    pub fn new(id: usize, cluster_size: usize, settings: RaftSettings, seed: Seed) -> Self {
        let mut rng = seed.rng();
        let election_timeout = rng.random_range(settings.election_timeout_min..=settings.election_timeout_max);
        Self {
            id,
            cluster_size,
            current_term: 0,
            voted_for: None,
            role: RaftRole::Follower,
            log: Vec::new(),
            commit_index: 0,
            election_timeout,
            elapsed: 0,
            leader_hint: None,
            votes: BTreeSet::new(),
            self_vote_pending: false,
            next_index: vec![1; cluster_size],
            match_index: vec![0; cluster_size],
            settings,
            rng,
        }
    }

    pub fn is_leader(&self) -> bool {
        self.role == RaftRole::Leader
    }

    /// The leader this node currently follows (itself when leading).
    pub fn leader_hint(&self) -> Option<usize> {
        if self.is_leader() {
            Some(self.id)
        } else {
            self.leader_hint
        }
    }

    pub fn last_log_index(&self) -> usize {
        self.log.len()
    }

    pub fn last_log_term(&self) -> u64 {
        self.log.last().map_or(0, |e| e.term)
    }

    pub fn entry(&self, index: usize) -> Option<&LogEntry> {
        index.checked_sub(1).and_then(|i| self.log.get(i))
    }

    /// Reset volatile state after a crash. Term, vote and log persist.
    pub fn resume(&mut self) {
        self.role = RaftRole::Follower;
        self.leader_hint = None;
        self.votes.clear();
        self.self_vote_pending = false;
        self.elapsed = 0;
        self.election_timeout = self.draw_timeout();
    }

    /// Append a round result to the leader's log. Returns the new entry's index.
    pub fn append_round(&mut self, payload: FinalizedRound) -> Result<usize> {
        if !self.is_leader() {
            return Err(Error::NotLeader);
        }
        self.log.push(LogEntry {
            term: self.current_term,
            payload: Some(payload),
        });
        self.match_index[self.id] = self.log.len();
        Ok(self.log.len())
    }

    pub fn has_round(&self, round: u64) -> bool {
        self.log
            .iter()
            .any(|e| e.payload.as_ref().is_some_and(|p| p.round == round))
    }

    fn draw_timeout(&mut self) -> u64 {
        self.rng
            .random_range(self.settings.election_timeout_min..=self.settings.election_timeout_max)
    }

    fn log_at_least_as_current(&self, last_index: usize, last_term: u64) -> bool {
        (last_term, last_index) >= (self.last_log_term(), self.last_log_index())
    }

    fn step_down(&mut self, term: u64) {
        self.current_term = term;
        self.voted_for = None;
        self.role = RaftRole::Follower;
        self.leader_hint = None;
        self.votes.clear();
        self.self_vote_pending = false;
    }

    fn send(&self, out: &mut Vec<Envelope>, to: usize, now: u64, message: Message) {
        out.push(Envelope {
            from: self.id,
            to,
            tick: now,
            message,
        });
    }

    fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cluster_size).filter(move |&p| p != self.id)
    }

    /// Advance one tick: consume `inbox`, run timers, emit outgoing envelopes.
    pub fn tick(&mut self, inbox: &[Envelope], now: u64) -> Vec<Envelope> {
        let mut out = Vec::new();
        let mut heard_from_leader = false;

        let mut ordered: Vec<&Envelope> = inbox.iter().filter(|e| e.to == self.id).collect();
        ordered.sort_by_key(|e| e.from);

        for env in ordered {
            let Some(term) = env.message.term() else {
                continue;
            };
            if term > self.current_term {
                self.step_down(term);
            }
            match &env.message {
                Message::RequestVote {
                    last_log_index,
                    last_log_term,
                    ..
                } => {
                    let free = match self.voted_for {
                        None => self.role != RaftRole::Candidate || env.from < self.id,
                        Some(v) => v == env.from,
                    };
                    let grant = term == self.current_term
                        && self.role != RaftRole::Leader
                        && free
                        && self.log_at_least_as_current(*last_log_index, *last_log_term);
                    if grant {
                        self.voted_for = Some(env.from);
                        if self.role == RaftRole::Candidate {
                            self.role = RaftRole::Follower;
                            self.votes.clear();
                            self.self_vote_pending = false;
                        }
                        heard_from_leader = true;
                        self.send(&mut out, env.from, now, Message::VoteGranted { term });
                    }
                }
                Message::VoteGranted { .. } => {
                    if self.role == RaftRole::Candidate && term == self.current_term {
                        self.votes.insert(env.from);
                    }
                }
                Message::AppendEntries {
                    prev_log_index,
                    prev_log_term,
                    entries,
                    leader_commit,
                    ..
                } => {
                    if term < self.current_term {
                        let reply = Message::AppendAck {
                            term: self.current_term,
                            success: false,
                            match_index: 0,
                        };
                        self.send(&mut out, env.from, now, reply);
                        continue;
                    }
                    if self.role != RaftRole::Follower {
                        self.role = RaftRole::Follower;
                        self.votes.clear();
                        self.self_vote_pending = false;
                    }
                    self.leader_hint = Some(env.from);
                    heard_from_leader = true;
                    let reply = self.accept_entries(*prev_log_index, *prev_log_term, entries, *leader_commit);
                    self.send(&mut out, env.from, now, reply);
                }
                Message::AppendAck {
                    success,
                    match_index,
                    ..
                } => {
                    if self.role == RaftRole::Leader && term == self.current_term {
                        if *success {
                            let m = self.match_index[env.from].max(*match_index);
                            self.match_index[env.from] = m;
                            self.next_index[env.from] = m + 1;
                        } else {
                            let next = self.next_index[env.from].saturating_sub(1).min(match_index + 1);
                            self.next_index[env.from] = next.max(1);
                        }
                    }
                }
                Message::FinalizedBroadcast { .. } => {
                    if term == self.current_term && self.role != RaftRole::Leader {
                        heard_from_leader = true;
                    }
                }
                Message::ClientReport { .. } => {}
            }
        }

        if self.role == RaftRole::Candidate && self.self_vote_pending {
            self.self_vote_pending = false;
            self.voted_for = Some(self.id);
            self.votes.insert(self.id);
        }

        if self.role == RaftRole::Candidate && self.votes.len() >= majority(self.cluster_size) {
            self.become_leader();
        }

        if self.role != RaftRole::Leader {
            if heard_from_leader {
                self.elapsed = 0;
            } else {
                self.elapsed += 1;
            }
            if self.elapsed >= self.election_timeout {
                self.start_election(now, &mut out);
            }
        }

        if self.role == RaftRole::Leader {
            self.advance_commit();
            self.replicate(now, &mut out);
        }
        out
    }

    fn accept_entries(
        &mut self,
        prev_log_index: usize,
        prev_log_term: u64,
        entries: &[LogEntry],
        leader_commit: usize,
    ) -> Message {
        let fail = |hint: usize, term: u64| Message::AppendAck {
            term,
            success: false,
            match_index: hint,
        };
        if prev_log_index > self.log.len() {
            return fail(self.log.len(), self.current_term);
        }
        if prev_log_index > 0 && self.log[prev_log_index - 1].term != prev_log_term {
            return fail(prev_log_index - 1, self.current_term);
        }
        for (k, entry) in entries.iter().enumerate() {
            let index = prev_log_index + 1 + k;
            match self.log.get(index - 1) {
                Some(existing) if existing.term == entry.term => {}
                Some(_) => {
                    self.log.truncate(index - 1);
                    self.log.push(entry.clone());
                }
                None => self.log.push(entry.clone()),
            }
        }
        let last_new = prev_log_index + entries.len();
        if leader_commit > self.commit_index {
            self.commit_index = leader_commit.min(last_new);
        }
        Message::AppendAck {
            term: self.current_term,
            success: true,
            match_index: last_new,
        }
    }

    fn start_election(&mut self, now: u64, out: &mut Vec<Envelope>) {
        self.current_term += 1;
        self.role = RaftRole::Candidate;
        self.voted_for = None;
        self.self_vote_pending = true;
        self.votes.clear();
        self.leader_hint = None;
        self.elapsed = 0;
        self.election_timeout = self.draw_timeout();
        let request = Message::RequestVote {
            term: self.current_term,
            last_log_index: self.last_log_index(),
            last_log_term: self.last_log_term(),
        };
        for p in self.peers().collect::<Vec<_>>() {
            self.send(out, p, now, request.clone());
        }
    }

    fn become_leader(&mut self) {
        self.role = RaftRole::Leader;
        self.leader_hint = Some(self.id);
        self.votes.clear();
        self.log.push(LogEntry {
            term: self.current_term,
            payload: None,
        });
        let last = self.log.len();
        self.next_index = vec![last; self.cluster_size];
        self.match_index = vec![0; self.cluster_size];
        self.match_index[self.id] = last;
        self.next_index[self.id] = last + 1;
    }

    fn advance_commit(&mut self) {
        let need = majority(self.cluster_size);
        for index in (self.commit_index + 1..=self.log.len()).rev() {
            if self.log[index - 1].term != self.current_term {
                break;
            }
            let replicated = self.match_index.iter().filter(|&&m| m >= index).count();
            if replicated >= need {
                self.commit_index = index;
                break;
            }
        }
    }

    fn replicate(&mut self, now: u64, out: &mut Vec<Envelope>) {
        for p in self.peers().collect::<Vec<_>>() {
            let next = self.next_index[p].clamp(1, self.log.len() + 1);
            let prev_log_index = next - 1;
            let prev_log_term = self.entry(prev_log_index).map_or(0, |e| e.term);
            let message = Message::AppendEntries {
                term: self.current_term,
                prev_log_index,
                prev_log_term,
                entries: self.log[prev_log_index..].to_vec(),
                leader_commit: self.commit_index,
            };
            self.send(out, p, now, message);
        }
    }
}
