use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ocf_core::game::{solve, CoalitionStructure, EngineConfig};
use ocf_core::policy::SelectMode;
use ocf_core::scenario::{generate_scenario, Scenario};
use ocf_core::tsac::{save_checkpoint, train, NetConfig, OptimizerKind, TrainConfig};
use ocf_harness::bench::{monte_carlo, BenchConfig, Scale};
use ocf_harness::export;
use ocf_harness::make_policy;
use ocf_harness::sim::simulate;
use ocf_harness::verify::{verify, verify_mutated, VerifyConfig};

#[derive(Parser)]
#[command(name = "ocf", version, about = "Overlapping coalition formation task allocation for delivery fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Engine and policy seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum sweeps; the decision budget is kmax times the fleet size.
    #[arg(long, default_value_t = 100)]
    kmax: usize,
    /// Consecutive non-improving decisions before stabilization [default: 3N].
    #[arg(long)]
    cmax: Option<usize>,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig { max_sweeps: self.kmax, max_idle: self.cmax, ..EngineConfig::with_seed(self.seed) }
    }
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// random, heuristic or tsac.
    #[arg(long, default_value = "heuristic")]
    policy: String,
    /// Network checkpoint for the tsac policy.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Take the most probable action instead of sampling (tsac only).
    #[arg(long)]
    argmax: bool,
}

impl PolicyArgs {
    fn mode(&self) -> SelectMode {
        if self.argmax {
            SelectMode::Argmax
        } else {
            SelectMode::Sample
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a random scenario as JSON.
    Generate {
        #[arg(long, default_value = "4/10")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the allocation once at a given time and write the structure as JSON.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Decision time in seconds.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay all arrival events and write timeline, traces and final structure.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the attention policy and write a checkpoint and learning curve.
    Train {
        #[arg(long, default_value = "4/10")]
        scale: Scale,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3e-4)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Use Adam instead of SGD with momentum.
        #[arg(long)]
        adam: bool,
        #[arg(long, default_value_t = 100)]
        kmax: usize,
        #[arg(long)]
        cmax: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired Monte-Carlo benchmark across scales and policies.
    Bench {
        /// Comma-separated scales, e.g. 4/10,8/20.
        #[arg(long, value_delimiter = ',', default_value = "4/10")]
        scales: Vec<Scale>,
        /// Comma-separated policies.
        #[arg(long, value_delimiter = ',', default_value = "random,heuristic")]
        policies: Vec<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        argmax: bool,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite and the wall-time scaling fit.
    Verify {
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value = "4/10")]
        scale: Scale,
        #[command(flatten)]
        engine: EngineArgs,
        /// Engine seeds per scenario and policy.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        no_scaling: bool,
        /// Use the non-strict acceptance rule; the suite is expected to fail.
        #[arg(long)]
        mutate: bool,
        /// Report file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Scenario::from_json(&text)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { scale, seed, out } => {
            let s = generate_scenario(&scale.generator(), seed)?;
            fs::write(&out, s.to_json())?;
            eprintln!("wrote {s} to {}", out.display());
        }
        Command::Solve { scenario, policy, engine, time, out } => {
            let s = read_scenario(&scenario)?;
            let p = make_policy(&policy.policy, policy.checkpoint.as_deref(), policy.mode())?;
            let result = solve(&s, time, CoalitionStructure::empty(&s, time), &p, &engine.config());
            fs::write(&out, serde_json::to_string_pretty(&result.structure.report(&s))?)?;
            eprintln!(
                "J = {:.6} after {} decisions ({} accepted, {:?})",
                result.structure.cost(),
                result.decisions,
                result.accepted,
                result.termination
            );
        }
        Command::Simulate { scenario, policy, engine, out } => {
            let s = read_scenario(&scenario)?;
            let p = make_policy(&policy.policy, policy.checkpoint.as_deref(), policy.mode())?;
            let t = simulate(&s, &p, &engine.config());
            fs::create_dir_all(&out)?;
            export::write_timeline(create(&out, "timeline.csv")?, &t.events)?;
            export::write_event_timing(create(&out, "timing.csv")?, &t.events)?;
            export::write_decisions(create(&out, "decisions.csv")?, &s, &t.events, &t.traces)?;
            export::write_routes(create(&out, "routes.csv")?, &s, &t.structure)?;
            export::write_task_costs(create(&out, "tasks.csv")?, &s, &t)?;
            export::write_histogram(create(&out, "coalitions.csv")?, &t)?;
            fs::write(out.join("structure.json"), serde_json::to_string_pretty(&t.structure.report(&s))?)?;
            for e in &t.events {
                eprintln!(
                    "t = {:>7.1} s: J {:.4} -> {:.4} in {} decisions ({:?})",
                    e.time, e.cost_before, e.cost_after, e.decisions, e.termination
                );
            }
        }
        Command::Train { scale, episodes, seed, lr, batch, alpha, gamma, d_model, heads, layers, adam, kmax, cmax, out } => {
            let cfg = TrainConfig {
                episodes,
                seed,
                lr,
                batch_size: batch,
                alpha,
                gamma,
                optimizer: if adam { OptimizerKind::adam() } else { OptimizerKind::default() },
                net: NetConfig { d_model, heads, layers, hidden: d_model, ..NetConfig::default() },
                generator: scale.generator(),
                engine: EngineConfig { max_sweeps: kmax, max_idle: cmax, ..EngineConfig::default() },
                ..TrainConfig::default()
            };
            let report = train(&cfg, &mut |p| {
                eprintln!("episode {:>4}: return {:>8.4}  J {:>9.4}  H {:.3}", p.episode, p.episode_return, p.final_cost, p.entropy);
            })?;
            fs::create_dir_all(&out)?;
            save_checkpoint(&report.net, &out.join("checkpoint.bin"))?;
            export::write_curve(create(&out, "curve.csv")?, &report.curve)?;
        }
        Command::Bench { scales, policies, checkpoint, argmax, runs, engine, workers, out } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let mode = if argmax { SelectMode::Argmax } else { SelectMode::Sample };
            let policies = policies
                .iter()
                .map(|name| make_policy(name, checkpoint.as_deref(), mode))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = BenchConfig { scales, policies, runs, base_seed: engine.seed, engine: engine.config(), workers };
            let report = monte_carlo(&cfg)?;
            fs::create_dir_all(&out)?;
            export::write_bench_runs(create(&out, "runs.csv")?, &report)?;
            export::write_bench_summary(create(&out, "bench.csv")?, &report)?;
            export::write_bench_timing(create(&out, "bench_timing.csv")?, &report)?;
            for r in &report.rows {
                eprintln!(
                    "{:>6} {:>10}: mean {:.3}  median {:.3}  IQR {:.3}  stable {:.0}%",
                    r.scale,
                    r.policy,
                    r.mean,
                    r.median,
                    r.iqr,
                    100.0 * r.stability_rate
                );
            }
        }
        Command::Verify { runs, scale, engine, repeats, no_scaling, mutate, out } => {
            let base = VerifyConfig {
                samples: runs,
                seed: engine.seed,
                scale,
                repeats,
                engine: engine.config(),
                scaling_tasks: if no_scaling { Vec::new() } else { VerifyConfig::default().scaling_tasks },
                ..VerifyConfig::default()
            };
            let report = if mutate { verify_mutated(&base)? } else { verify(&base)? };
            println!("{report}");
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            }
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
