use swarmraft::attacks::{AttackMode, OffsetModel};
use swarmraft::harness::{grid_sweep, run_cells, run_trial_with, Simulation, SwarmConfig};
use swarmraft::raft::{Cluster, RaftSettings};
use swarmraft::random::stream;
use swarmraft::sensors::Motion;
use swarmraft::verification::{ClientReport, DetectionParams};
use swarmraft::{CovarianceDiag, Position, Seed};

fn noiseless(config: SwarmConfig) -> SwarmConfig {
    SwarmConfig {
        r_gnss: CovarianceDiag::ZERO,
        r_ins: CovarianceDiag::ZERO,
        sigma_d: 0.0,
        ..config
    }
}

fn collusion_at_bound(base: SwarmConfig, trials: usize) -> Vec<(usize, f64, u64)> {
    let mut base = base;
    base.attack.mode = AttackMode::Collusion;
    let cells: Vec<(usize, usize)> = (1..=8).map(|f| (2 * f + 1, f)).collect();
    let run = run_cells(&base, &cells, trials, None).unwrap();
    run.summary.cells.iter().map(|c| (c.n, c.exact_detection_rate, c.fp)).collect()
}

#[test]
fn collusion_at_the_safety_bound_is_exact_without_noise() {
    for (n, rate, fp) in collusion_at_bound(noiseless(SwarmConfig::default()), 50) {
        assert_eq!((rate, fp), (1.0, 0), "n={n}");
    }
}

#[test]
#[ignore = "at n = 2f + 1 an honest tally is exactly 0, so one noisy honest pair flags it; measured rates fall from 0.74 (n=3) to 0.001 (n=17)"]
fn collusion_at_the_safety_bound_is_detected_under_noise() {
    for (n, rate, _) in collusion_at_bound(SwarmConfig::default(), 1000) {
        println!("n={n} exact detection {rate:.3}");
        assert!(rate >= 0.99, "n={n} rate {rate}");
    }
}

#[test]
fn honest_nodes_are_rarely_flagged() {
    let config = SwarmConfig {
        f: 0,
        ..SwarmConfig::default()
    };
    let run = grid_sweep(&config, &[3, 5, 9, 13, 17], &[0], 2000, None).unwrap();
    for c in &run.summary.cells {
        let per_node = c.fp as f64 / (c.trials * c.n) as f64;
        assert!(per_node < 0.01, "n={}: {per_node}", c.n);
        assert_eq!(c.tp + c.fn_, 0);
    }
}

#[test]
fn fixed_vector_baseline_is_exact_fraction() {
    let mut base = noiseless(SwarmConfig::default());
    base.attack.offset_model = OffsetModel::FixedVector;
    base.attack.fixed_offset = [30.0, 40.0, 0.0];
    let run = grid_sweep(&base, &[7, 11], &[1, 2, 3], 3, None).unwrap();
    for t in &run.trials {
        let expected = t.f as f64 * 50.0 / t.n as f64;
        assert!((t.baseline_mae - expected).abs() < 1e-9);
        assert!(t.recovered_mae < 1e-6);
        assert_eq!(t.true_positive_flags + t.false_negative_flags, t.f);
    }
}

#[test]
fn baseline_grows_with_attackers_and_detection_breaks_past_bound() {
    let run = grid_sweep(&SwarmConfig::default(), &[9], &[1, 2, 3, 4, 5, 6, 7, 8], 300, None).unwrap();
    let cells = &run.summary.cells;
    assert!(cells.windows(2).all(|w| w[1].baseline.mean > w[0].baseline.mean));
    let safe = cells.iter().filter(|c| 2 * c.f < c.n).map(|c| c.exact_detection_rate);
    let unsafe_ = cells.iter().filter(|c| 2 * c.f >= c.n).map(|c| c.exact_detection_rate);
    let worst_safe = safe.fold(1.0, f64::min);
    let best_unsafe = unsafe_.fold(0.0, f64::max);
    assert!(best_unsafe < worst_safe, "unsafe {best_unsafe} vs safe {worst_safe}");
}

#[test]
fn moving_swarm_with_drifting_spoof_stays_bounded() {
    let mut config = SwarmConfig {
        n: 9,
        f: 3,
        rounds: 10,
        motion: Motion::ConstantVelocity { speed: 5.0 },
        ..SwarmConfig::default()
    };
    config.attack.offset_model = OffsetModel::TimeVarying;
    config.attack.drift_magnitude = 2.0;
    let params = config.resolve_detection().unwrap().params;
    let mut better = 0;
    for t in 0..50 {
        let r = run_trial_with(&config, &params, Seed(t), t as usize).unwrap();
        assert!(r.recovered_mae.is_finite());
        if r.recovered_mae <= r.baseline_mae {
            better += 1;
        }
    }
    assert!(better >= 45, "{better}/50");
}

#[test]
fn range_tampering_does_not_move_honest_reports() {
    let mut config = noiseless(SwarmConfig {
        n: 7,
        f: 1,
        ..SwarmConfig::default()
    });
    config.attack.mode = AttackMode::RangeTamper;
    config.attack.range_bias = 30.0;
    let params = config.resolve_detection().unwrap().params;
    let record = Simulation::new(&config, params, Seed(4)).unwrap().run_round().unwrap();
    // Reports are truthful, so the only possible damage is a flagged node
    // being moved; the tampered node itself is outvoted.
    for o in &record.outcomes {
        let s = &record.states[o.node_id];
        if !o.faulty {
            assert_eq!(o.verified_position, s.gnss_reading);
        }
    }
    assert!(record.outcomes.iter().filter(|o| o.faulty).count() <= 1);
}

fn honest_reports(n: usize) -> Vec<ClientReport> {
    let positions: Vec<Position> = (0..n).map(|i| Position::new(20.0 * i as f64, (i * i) as f64, 0.0)).collect();
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| ClientReport {
            node_id: i,
            reported_position: p,
            ins_estimate: p,
            range_row: (0..n).filter(|&j| j != i).map(|j| (j, p.distance_to(&positions[j]))).collect(),
        })
        .collect()
}

#[test]
fn follower_crash_keeps_leader_and_catches_up() {
    let mut cluster = Cluster::new(5, RaftSettings::default(), DetectionParams::with_tolerance(1.0), Seed(8).derive(stream::RAFT)).unwrap();
    let leader = cluster.elect(100).unwrap();
    cluster.run_ticks(2).unwrap();
    let follower = (leader + 1) % 5;
    cluster.crash(follower, 5).unwrap();
    cluster.run_round(1, honest_reports(5), 50).unwrap();
    cluster.run_ticks(10).unwrap();
    assert_eq!(cluster.leader(), Some(leader));
    let leader_log = cluster.nodes()[leader].last_log_index();
    assert_eq!(cluster.nodes()[follower].last_log_index(), leader_log);
    assert!(cluster.nodes()[follower].has_round(1));
}

#[test]
fn honest_consensus_round_commits_unflagged() {
    let mut cluster = Cluster::new(3, RaftSettings::default(), DetectionParams::with_tolerance(1e-6), Seed(1)).unwrap();
    cluster.elect(100).unwrap();
    cluster.run_ticks(1).unwrap();
    let commit = cluster.run_round(1, honest_reports(3), 50).unwrap();
    assert!(commit.finalized.outcomes.iter().all(|o| !o.faulty));
    assert_eq!(commit.ticks_to_commit(), 3);
}
