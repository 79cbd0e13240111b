use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SwarmConfig;
use crate::attacks::{apply_collusion, apply_gnss_spoof, apply_range_tamper, pairs_touching, select_attacked};
use crate::error::Result;
use crate::geometry::Position;
use crate::raft::Cluster;
use crate::random::{stream, Seed, SimRng};
use crate::sensors::{measure_ranges, propagate_ins, sample_formation, sample_gnss, MotionIncrement, NodeState, RangeMatrix};
use crate::verification::{
    verify_and_recover, ClientReport, DetectionParams, Provenance, VerificationOutcome, VoteTally,
};

/// Ground truth and sensor state of one swarm across rounds.
#[derive(Debug, Clone)]
pub struct World {
    round: u64,
    seed: Seed,
    nodes: Vec<NodeState>,
    velocities: Vec<Position>,
    attacked: BTreeSet<usize>,
    gnss_rng: SimRng,
    ins_rng: SimRng,
    range_rng: SimRng,
}

/// Everything sensed in one round, after attacks.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedRound {
    pub round: u64,
    pub states: Vec<NodeState>,
    pub ranges: RangeMatrix,
    pub reports: Vec<ClientReport>,
}

impl World {
    /// Round-zero world: formation, headings and the attacked set are fixed here.
    pub fn new(config: &SwarmConfig, seed: Seed) -> Result<Self> {
        config.validate()?;
        let planar = config.planar();
        let truths = sample_formation(
            config.n,
            planar,
            config.bounding_box,
            config.min_separation,
            &mut seed.stream(&[stream::FORMATION]),
        )?;
        let velocities = config
            .motion
            .velocities(config.n, planar, &mut seed.stream(&[stream::VELOCITY]));
        let attacked = select_attacked(config.n, config.f, &mut seed.stream(&[stream::ATTACK_SELECT]))?;
        let nodes = truths
            .iter()
            .enumerate()
            .map(|(i, &p)| NodeState::at_origin_round(i, p))
            .collect();
        Ok(Self {
            round: 0,
            seed,
            nodes,
            velocities,
            attacked,
            gnss_rng: seed.stream(&[stream::GNSS]),
            ins_rng: seed.stream(&[stream::INS]),
            range_rng: seed.stream(&[stream::RANGE]),
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn attacked(&self) -> &BTreeSet<usize> {
        &self.attacked
    }

    pub fn truths(&self) -> Vec<Position> {
        self.nodes.iter().map(|s| s.true_position).collect()
    }

    /// Move, sense, range and attack: the first two steps of a round.
    pub fn sense(&mut self, config: &SwarmConfig) -> Result<SensedRound> {
        self.round += 1;
        let r_gnss = config.effective_r_gnss();
        let r_ins = config.effective_r_ins();
        for (node, &v) in self.nodes.iter_mut().zip(&self.velocities) {
            let increment = MotionIncrement { delta: v };
            node.true_position += v;
            node.ins_estimate = propagate_ins(node.ins_estimate, &increment, &r_ins, &mut self.ins_rng);
            node.gnss_reading = sample_gnss(node.true_position, &r_gnss, &mut self.gnss_rng);
        }
        let truths = self.truths();
        let mut ranges = measure_ranges(&truths, config.sigma_d, &mut self.range_rng)?;

        let mut states = self.nodes.clone();
        if !self.attacked.is_empty() {
            let attack = &config.attack;
            // A fresh copy of the same stream each round keeps every spoofer's offset persistent.
            let mut spoof_rng = self.seed.stream(&[stream::SPOOF]);
            if attack.is_collusive() {
                states = apply_collusion(&states, &self.attacked, attack, &mut spoof_rng, self.round, config.planar())?;
            } else if attack.spoofs_gnss() {
                states = apply_gnss_spoof(&states, &self.attacked, attack, &mut spoof_rng, self.round, config.planar())?;
            }
            if attack.tampers_ranges() {
                ranges = apply_range_tamper(&ranges, &pairs_touching(config.n, &self.attacked), attack.range_bias)?;
            }
            for &id in &self.attacked {
                states[id].is_attacked = true;
            }
        }

        let reports = states
            .iter()
            .map(|s| ClientReport {
                node_id: s.id,
                reported_position: s.gnss_reading,
                ins_estimate: s.ins_estimate,
                range_row: (0..states.len())
                    .filter(|&j| j != s.id)
                    .map(|j| (j, ranges.get(s.id, j)))
                    .collect(),
            })
            .collect();
        Ok(SensedRound {
            round: self.round,
            states,
            ranges,
            reports,
        })
    }

    /// Nodes recovered by multilateration restart dead reckoning from the fix.
    pub fn apply_outcomes(&mut self, outcomes: &[VerificationOutcome]) {
        for o in outcomes {
            if o.provenance == Provenance::Multilaterated {
                if let Some(node) = self.nodes.get_mut(o.node_id) {
                    node.ins_estimate = o.verified_position;
                }
            }
        }
    }
}

/// One completed round: what was sensed, what the leader decided, and cost counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub states: Vec<NodeState>,
    pub outcomes: Vec<VerificationOutcome>,
    pub tallies: Vec<VoteTally>,
    pub leader_ops: u64,
    pub solver_evaluations: u64,
    /// Range measurements taken by each regular node.
    pub node_ops: u64,
    /// Round messages handled by the leader; only set with consensus.
    pub messages: Option<u64>,
    pub ticks_to_commit: Option<u64>,
    pub leader: Option<usize>,
}

/// Ticks allowed for one round to commit before giving up.
const ROUND_TICK_BUDGET: u64 = 200;

/// A world plus the verifier (direct or through Raft) that runs it round by round.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SwarmConfig,
    params: DetectionParams,
    world: World,
    cluster: Option<Cluster>,
}

impl Simulation {
    pub fn new(config: &SwarmConfig, params: DetectionParams, seed: Seed) -> Result<Self> {
        let world = World::new(config, seed)?;
        let cluster = if config.consensus_enabled {
            let mut c = Cluster::new(config.n, config.raft, params.clone(), seed.derive(stream::RAFT))?;
            c.elect(ROUND_TICK_BUDGET)?;
            // Let followers learn the leader before the first round.
            c.run_ticks(1)?;
            Some(c)
        } else {
            None
        };
        Ok(Self {
            config: config.clone(),
            params,
            world,
            cluster,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn cluster(&self) -> Option<&Cluster> {
        self.cluster.as_ref()
    }

    pub fn params(&self) -> &DetectionParams {
        &self.params
    }

    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let sensed = self.world.sense(&self.config)?;
        let n = self.config.n as u64;
        let record = match &mut self.cluster {
            None => {
                let ins: Vec<Position> = sensed.reports.iter().map(|r| r.ins_estimate).collect();
                let v = verify_and_recover(&sensed.reports, &sensed.ranges, &ins, &self.params)?;
                RoundRecord {
                    round: sensed.round,
                    states: sensed.states,
                    outcomes: v.outcomes,
                    tallies: v.tallies,
                    leader_ops: v.leader_ops,
                    solver_evaluations: v.solver_evaluations,
                    node_ops: n - 1,
                    messages: None,
                    ticks_to_commit: None,
                    leader: None,
                }
            }
            Some(cluster) => {
                let commit = cluster.run_round(sensed.round, sensed.reports, ROUND_TICK_BUDGET)?;
                RoundRecord {
                    round: sensed.round,
                    states: sensed.states,
                    outcomes: commit.finalized.outcomes.clone(),
                    tallies: commit.finalized.tallies.clone(),
                    leader_ops: commit.finalized.leader_ops,
                    solver_evaluations: commit.finalized.solver_evaluations,
                    node_ops: n - 1,
                    messages: Some(commit.leader_messages()),
                    ticks_to_commit: Some(commit.ticks_to_commit()),
                    leader: Some(commit.leader),
                }
            }
        };
        self.world.apply_outcomes(&record.outcomes);
        Ok(record)
    }
}

/// Advance `world` by one round and verify it directly, without consensus.
pub fn run_round(world: &mut World, config: &SwarmConfig, params: &DetectionParams) -> Result<RoundRecord> {
    let sensed = world.sense(config)?;
    let ins: Vec<Position> = sensed.reports.iter().map(|r| r.ins_estimate).collect();
    let v = verify_and_recover(&sensed.reports, &sensed.ranges, &ins, params)?;
    world.apply_outcomes(&v.outcomes);
    Ok(RoundRecord {
        round: sensed.round,
        states: sensed.states,
        outcomes: v.outcomes,
        tallies: v.tallies,
        leader_ops: v.leader_ops,
        solver_evaluations: v.solver_evaluations,
        node_ops: config.n as u64 - 1,
        messages: None,
        ticks_to_commit: None,
        leader: None,
    })
}
