use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use qubofl_cli::{compare, run, Config, RunOptions};

#[derive(Parser)]
#[command(name = "qubofl", version, about = "Federated learning with QUBO-based client selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, alpha, seed) cell of a config or built-in profile.
    Run {
        /// Path to a TOML config.
        config: Option<PathBuf>,
        /// Built-in profile: mnist-paper-scaled, cinic-profile or smoke.
        #[arg(long, conflicts_with = "config")]
        profile: Option<String>,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory (defaults to the config's scenario.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of cells run in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        /// Print the resolved config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Align per-round results across methods and tally strategy wins.
    Compare { dir: PathBuf },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            profile,
            seed_override,
            out,
            jobs,
            print_config,
        } => {
            let cfg = match (config, profile) {
                (Some(path), None) => Config::load(&path)?,
                (None, Some(name)) => Config::profile(&name)?,
                _ => bail!("give either a config path or --profile <name>"),
            };
            if print_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let report = run(
                &cfg,
                &RunOptions {
                    out,
                    seed_override,
                    jobs,
                },
            )?;
            for s in &report.summaries {
                println!(
                    "{:<28} final_acc={:.4} max_acc={:.4} privacy={:.4} never_selected={:.4}",
                    s.run_id, s.final_accuracy, s.max_accuracy, s.mean_per_round_privacy, s.never_selected_fraction
                );
            }
            println!("results written to {}", report.out_dir.display());
        }
        Command::Compare { dir } => {
            let cmp = compare(&dir)?;
            let table = dir.join("comparison.csv");
            fs::write(&table, cmp.to_csv()).with_context(|| format!("writing {}", table.display()))?;
            if !cmp.histogram.is_empty() {
                let hist = dir.join("strategy_histogram.csv");
                fs::write(&hist, cmp.histogram_csv()).with_context(|| format!("writing {}", hist.display()))?;
            }
            print!("{}", cmp.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
