//! Command-line front end. `swarmraft --help` lists the subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::{export_results, write_json, write_trials_jsonl, ExportFormat};
use crate::harness::{
    grid_sweep, scaling_experiment, snapshot_round, ResolvedDetection, Simulation, SweepRun,
    SwarmConfig, TrialResult,
};
use crate::raft::demo::{randomized, run_demo, DemoConfig, DemoReport, LeaderCrash};
use crate::raft::{CrashFault, RaftSettings};
use crate::random::{stream, Seed};
use crate::verification::calibrate_threshold;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "swarmraft", version, about = "Spoofing detection and recovery for simulated UAV swarms")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub output_dir: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub f: Option<usize>,
    #[arg(long, global = true)]
    pub rounds: Option<u64>,
    #[arg(long, global = true)]
    pub dimension: Option<usize>,
    #[arg(long, global = true)]
    pub sigma_d: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub offset_magnitude: Option<f64>,
    #[arg(long, global = true)]
    pub consensus_enabled: bool,
    /// Any config key, e.g. `--set attack.mode=collusion`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the honest residual threshold T = mu + 3 sigma.
    Calibrate {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run one trial and write a per-node snapshot of its last round.
    Simulate,
    /// Grid sweep over swarm sizes and attacker counts.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 5, 7, 9, 11, 13, 15, 17])]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
        fs: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Minimal-swarm scaling: n = 2f + 1 for each f.
    Scaling {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
        fs: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Run the Raft cluster under crashes and check its safety properties.
    RaftDemo {
        #[arg(long = "nodes", default_value_t = 5)]
        nodes: usize,
        #[arg(long, default_value_t = 120)]
        ticks: u64,
        /// Crash whoever leads at TICK for DURATION ticks (`TICK:DURATION`).
        #[arg(long = "crash-leader", value_name = "TICK:DURATION")]
        crash_leader: Vec<String>,
        /// Crash a fixed node (`NODE@TICK:DURATION`).
        #[arg(long = "crash", value_name = "NODE@TICK:DURATION")]
        crash: Vec<String>,
        /// Inject random minority crashes instead of the scripted ones.
        #[arg(long)]
        random: bool,
    },
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Build the effective config: file (or defaults), then `--set`, then scalar flags.
pub fn resolve_config(g: &GlobalArgs) -> Result<SwarmConfig> {
    let mut config = match &g.config {
        Some(path) => SwarmConfig::load(path)?,
        None => SwarmConfig::default(),
    };
    for item in &g.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(v) = g.n {
        config.n = v;
    }
    if let Some(v) = g.f {
        config.f = v;
    }
    if let Some(v) = g.rounds {
        config.rounds = v;
    }
    if let Some(v) = g.dimension {
        config.dimension = v;
    }
    if let Some(v) = g.sigma_d {
        config.sigma_d = v;
    }
    if let Some(v) = g.tau {
        config.detection.tau = Some(v);
    }
    if let Some(v) = g.epsilon {
        config.detection.epsilon = Some(v);
    }
    if let Some(v) = g.offset_magnitude {
        config.attack.offset_magnitude = v;
    }
    if g.consensus_enabled {
        config.consensus_enabled = true;
    }
    if let Some(s) = g.seed {
        config.seed = Seed(s);
    }
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<i32> {
    let out = &cli.global.output_dir;
    match &cli.command {
        Command::RaftDemo {
            nodes,
            ticks,
            crash_leader,
            crash,
            random,
        } => {
            let seed = Seed(cli.global.seed.unwrap_or(0));
            let raft = match &cli.global.config {
                Some(path) => SwarmConfig::load(path)?.raft,
                None => RaftSettings::default(),
            };
            raft_demo(*nodes, *ticks, crash_leader, crash, *random, seed, raft, out)
        }
        command => {
            let config = resolve_config(&cli.global)?;
            config.validate()?;
            match command {
                Command::Calibrate { trials } => calibrate(&config, *trials, out).map(|_| EXIT_OK),
                Command::Simulate => simulate(&config, out).map(|_| EXIT_OK),
                Command::Sweep { ns, fs, trials } => {
                    let run = grid_sweep(&config, ns, fs, *trials, cli.global.jobs)?;
                    write_sweep(&run, "sweep", out).map(|_| EXIT_OK)
                }
                Command::Scaling { fs, trials } => {
                    let run = scaling_experiment(&config, fs, *trials, cli.global.jobs)?;
                    write_sweep(&run, "scaling", out).map(|_| EXIT_OK)
                }
                Command::RaftDemo { .. } => unreachable!("handled above"),
            }
        }
    }
}

#[derive(Serialize)]
struct Histogram {
    edges: Vec<f64>,
    counts: Vec<usize>,
}

fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi <= lo {
        return Histogram {
            edges: vec![lo.min(0.0), hi.max(0.0)],
            counts: vec![values.len()],
        };
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram {
        edges: (0..=bins).map(|k| lo + width * k as f64).collect(),
        counts,
    }
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    config: &'a SwarmConfig,
    mu_e: f64,
    sigma_e: f64,
    threshold: f64,
    trials: usize,
    samples: usize,
    exceedance_rate: f64,
    histogram: Histogram,
}

pub fn calibrate(config: &SwarmConfig, trials: Option<usize>, out: &Path) -> Result<PathBuf> {
    let trials = trials.unwrap_or(config.detection.calibration_trials);
    let seed = config.seed.derive_path(&[stream::CALIBRATION, config.n as u64]);
    let c = calibrate_threshold(config, trials, seed)?;
    info!("calibrated T = {:.4} m from {} residuals", c.threshold, c.residuals.len());
    let report = CalibrationReport {
        config,
        mu_e: c.mu_e,
        sigma_e: c.sigma_e,
        threshold: c.threshold,
        trials: c.trials,
        samples: c.residuals.len(),
        exceedance_rate: c.exceedance_rate(),
        histogram: histogram(&c.residuals, 20),
    };
    let path = out.join("calibration.json");
    write_json(&report, &path)?;
    println!("T = {:.6} m (mu = {:.6}, sigma = {:.6}) -> {}", c.threshold, c.mu_e, c.sigma_e, path.display());
    Ok(path)
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    config: &'a SwarmConfig,
    detection: &'a ResolvedDetection,
    result: &'a TrialResult,
}

pub fn simulate(config: &SwarmConfig, out: &Path) -> Result<()> {
    let detection = config.resolve_detection()?;
    let mut sim = Simulation::new(config, detection.params.clone(), config.seed.derive(stream::TRIAL))?;
    let mut last = sim.run_round()?;
    for _ in 1..config.rounds {
        last = sim.run_round()?;
    }
    let result = TrialResult::from_round(config.n, config.f, 0, &last)?;
    write_json(&snapshot_round(config, &last), &out.join("snapshot.json"))?;
    write_json(
        &SimulationReport {
            config,
            detection: &detection,
            result: &result,
        },
        &out.join("trial.json"),
    )?;
    println!(
        "n={} f={}: baseline MAE {:.4} m, recovered MAE {:.4} m, flagged {} (tp {}, fp {}, fn {})",
        config.n,
        config.f,
        result.baseline_mae,
        result.recovered_mae,
        result.true_positive_flags + result.false_positive_flags,
        result.true_positive_flags,
        result.false_positive_flags,
        result.false_negative_flags
    );
    Ok(())
}

fn write_sweep(run: &SweepRun, stem: &str, out: &Path) -> Result<()> {
    export_results(&run.summary, ExportFormat::Csv, &out.join(format!("{stem}.csv")))?;
    export_results(&run.summary, ExportFormat::Json, &out.join(format!("{stem}.json")))?;
    write_trials_jsonl(&run.summary.config, &run.trials, &out.join(format!("{stem}_trials.jsonl")))?;
    println!("{:>4} {:>4} {:>14} {:>14}", "n", "f", "baseline_mean", "recovered_mean");
    for c in &run.summary.cells {
        println!("{:>4} {:>4} {:>14.4} {:>14.4}", c.n, c.f, c.baseline.mean, c.recovered.mean);
    }
    Ok(())
}

fn parse_span(text: &str) -> Result<(u64, u64)> {
    let bad = || Error::Config(format!("expected TICK:DURATION, got `{text}`"));
    let (t, d) = text.split_once(':').ok_or_else(bad)?;
    Ok((t.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?))
}

fn parse_crash(text: &str) -> Result<CrashFault> {
    let (node, span) = text
        .split_once('@')
        .ok_or_else(|| Error::Config(format!("expected NODE@TICK:DURATION, got `{text}`")))?;
    let node = node
        .parse()
        .map_err(|_| Error::Config(format!("bad node id in `{text}`")))?;
    let (start, duration) = parse_span(span)?;
    Ok(CrashFault { node, start, duration })
}

#[derive(Serialize)]
struct DemoOutput<'a> {
    config: &'a DemoConfig,
    report: &'a DemoReport,
}

#[allow(clippy::too_many_arguments)]
fn raft_demo(
    n: usize,
    ticks: u64,
    crash_leader: &[String],
    crash: &[String],
    random: bool,
    seed: Seed,
    raft: RaftSettings,
    out: &Path,
) -> Result<i32> {
    if n < 3 {
        return Err(Error::Config(format!("raft-demo needs at least 3 nodes, got {n}")));
    }
    let config = if random {
        DemoConfig {
            raft,
            ..randomized(n, ticks, seed)
        }
    } else {
        let leader_crashes = crash_leader
            .iter()
            .map(|s| parse_span(s).map(|(tick, duration)| LeaderCrash { tick, duration }))
            .collect::<Result<Vec<_>>>()?;
        let crashes = crash.iter().map(|s| parse_crash(s)).collect::<Result<Vec<_>>>()?;
        DemoConfig {
            n,
            ticks,
            seed,
            raft,
            crashes,
            leader_crashes,
            ..DemoConfig::default()
        }
    };
    let (report, cluster) = run_demo(&config, true)?;
    cluster.write_trace_jsonl(&out.join("raft_trace.jsonl"))?;
    write_json(
        &DemoOutput {
            config: &config,
            report: &report,
        },
        &out.join("raft_verdict.json"),
    )?;
    for (tick, node, term) in &report.elections {
        println!("tick {tick:>4}: node {node} leads term {term}");
    }
    for r in &report.verdict.reelections {
        println!(
            "leader {} crashed at tick {}: replaced at {:?} (bound {} ticks{})",
            r.crashed_leader,
            r.crash_tick,
            r.elected_tick,
            r.bound,
            if r.applicable { "" } else { ", not applicable" }
        );
    }
    println!("rounds committed: {}/{}", report.rounds_committed, report.rounds_offered);
    for v in &report.verdict.violations {
        println!("violation: {v}");
    }
    if report.verdict.passed {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_CHECK_FAILED)
    }
}
