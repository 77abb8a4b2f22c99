use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use stackseek_cli::{run_checks, run_experiment, write_oracle, ExperimentConfig, RunOverrides};

#[derive(Parser)]
#[command(
    name = "stackseek",
    version,
    about = "Zeroth-order Stackelberg seeking over monotone follower games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write traces, summary.csv and metrics.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "iters")]
        iterations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Use the ascent-form estimator sign instead of the descent form.
        #[arg(long)]
        ascent_sign: bool,
    },
    /// Audit monotonicity, strong convexity, feasibility and step sizes.
    Check { config: PathBuf },
    /// Compute reference values and write oracle.json.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for runs that faulted and audits that failed.
const EXIT_FAULT: u8 = 2;

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            iterations,
            out,
            replicates,
            ascent_sign,
        } => {
            let overrides = RunOverrides {
                seed,
                iterations,
                out,
                replicates,
                ascent_sign,
            };
            let cfg = overrides.apply(&ExperimentConfig::from_path(&config)?)?;
            let metrics = run_experiment(&cfg)?;
            for r in &metrics.replicates {
                let j0 = r.best_j0.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
                println!(
                    "seed {}: {} records, best J0 {j0}, {:.2}s",
                    r.seed, r.records, r.wall_clock_s
                );
                if let Some(f) = &r.fault {
                    eprintln!("seed {}: fault: {f}", r.seed);
                }
            }
            Ok(if metrics.faulted() {
                ExitCode::from(EXIT_FAULT)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let audits = run_checks(&cfg)?;
            for a in &audits {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            Ok(if audits.iter().all(|a| a.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAULT)
            })
        }
        Command::Oracle { config, out } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if out.is_some() {
                cfg.out = out;
            }
            let (path, report) = write_oracle(&cfg)?;
            match (&report.y_star, report.j0_star) {
                (Some(y), Some(j)) => println!("y* = {y:?}, J0* = {j:.6e} ({})", report.method),
                _ => println!(
                    "no reference minimiser for {}; wrote {} reference points",
                    report.scenario,
                    report.points.len()
                ),
            }
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
