use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etcrl::harness::{self, parse_config, RunConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "etcrl", version, about = "Learning event-triggered control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `dotted.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed.
    Train(Common),
    /// Evaluate trained checkpoints or a baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding `seed_<n>` checkpoint folders; defaults to the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep λ (train and evaluate) or δ (baselines).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["lambda", "delta"])]
        axis: Option<String>,
    },
    /// Threshold sweeps of the model-based triggering laws.
    Baseline(Common),
}

fn load(common: &Common) -> etcrl::Result<RunConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seeds=[{seed}]"));
    }
    if let Some(out) = &common.out {
        overrides.push(format!("out={}", toml::Value::String(out.display().to_string())));
    }
    parse_config(&common.config, &overrides)
}

fn run(cli: Cli) -> etcrl::Result<bool> {
    match cli.command {
        Command::Train(common) => {
            let cfg = load(&common)?;
            let mut ok = true;
            for (seed, result) in harness::run_training(&cfg)? {
                match result {
                    Ok(s) => println!("seed {seed}: {} iterations, {} episodes -> {}", s.iterations, s.episodes, s.dir.display()),
                    Err(e) => {
                        ok = false;
                        eprintln!("seed {seed}: {e}");
                    }
                }
            }
            Ok(ok)
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load(&common)?;
            let root = checkpoint.unwrap_or_else(|| cfg.out.clone());
            let rows = harness::run_eval(&cfg, &root)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| etcrl::Error::Io { path: cfg.out.clone(), source: e })?;
            cfg.write_effective(&cfg.out)?;
            harness::export_summary(&rows, &cfg.out.join("eval.csv"))?;
            for r in rows.iter().filter(|r| r.episode.is_none()) {
                println!(
                    "seed {}: cost {:.4e}, comm {:.3}, stable {:.2} [{}]",
                    r.seed.map_or("-".into(), |s| s.to_string()),
                    r.mean_cost,
                    r.mean_comm,
                    r.stable_fraction,
                    r.status
                );
            }
            Ok(harness::all_ok(&rows))
        }
        Command::Sweep { common, axis } => {
            let cfg = load(&common)?;
            let axis = match axis.as_deref() {
                Some("delta") => SweepAxis::Delta,
                Some(_) => SweepAxis::Lambda,
                None => cfg.sweep.axis,
            };
            let rows = harness::run_sweep(&cfg, axis)?;
            for r in &rows {
                println!("{:>12} cost {:.4e} comm {:.3} [{}]", r.grid_value.unwrap_or(f64::NAN), r.mean_cost, r.mean_comm, r.status);
            }
            Ok(harness::all_ok(&rows))
        }
        Command::Baseline(common) => {
            let cfg = load(&common)?;
            for (law, points) in harness::run_baseline(&cfg)? {
                let best = etcrl::baselines::max_stable_saving(&points, 0.9);
                match best {
                    Some((delta, saving)) => println!("{}: max stable saving {:.1}% at delta {delta:.4}", law.name(), 100.0 * saving),
                    None => println!("{}: no stable threshold", law.name()),
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
