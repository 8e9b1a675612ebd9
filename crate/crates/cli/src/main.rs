use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gnloo::harness::check;
use gnloo::harness::sweep::{figure_configs, SweepOptions};
use gnloo::harness::{run_adaptive, run_experiment, AdaptiveRunConfig, ExperimentConfig};
use gnloo::{Error, Seed};

/// Generalized Nyström experiments with fast leave-one-out error estimates.
#[derive(Parser, Debug)]
#[command(name = "gnloo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment described by a TOML config and write its CSV.
    Run {
        config: PathBuf,
        /// Write the CSV here instead of the config's output_path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Reproduce one of the published sweeps.
    Sweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        figure: u8,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Skip the brute-force estimators (much faster).
        #[arg(long)]
        no_naive: bool,
        /// Leave the timing columns empty so reruns are byte-identical.
        #[arg(long)]
        no_timings: bool,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Grow a sketch until the estimated error meets a tolerance.
    Adaptive {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the equivalence and identity self-checks.
    Check,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        Some(Error::Io(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(path) = output {
                cfg.output_path = path;
            }
            let rows = run_experiment(&cfg).with_context(|| format!("experiment {}", config.display()))?;
            let flagged = rows.iter().filter(|r| !r.flags.is_empty()).count();
            println!("wrote {} rows to {} ({flagged} flagged)", rows.len(), cfg.output_path.display());
            Ok(0)
        }
        Command::Sweep { figure, out_dir, no_naive, no_timings, trials, seed } => {
            let opts = SweepOptions {
                out_dir,
                include_naive: !no_naive,
                timings: !no_timings,
                trials,
                base_seed: Seed(seed),
            };
            for cfg in figure_configs(figure, &opts)? {
                let rows = run_experiment(&cfg)?;
                let flagged = rows.iter().filter(|r| !r.flags.is_empty()).count();
                println!("wrote {} rows to {} ({flagged} flagged)", rows.len(), cfg.output_path.display());
            }
            Ok(0)
        }
        Command::Adaptive { config, output } => {
            let mut cfg = AdaptiveRunConfig::load(&config)?;
            if let Some(path) = output {
                cfg.output_path = path;
            }
            let out = run_adaptive(&cfg)?;
            println!(
                "{} at s = {} after {} steps; true error {:e}; trace in {}",
                out.trace.termination,
                out.trace.final_s(),
                out.trace.entries.len(),
                out.true_fro_error,
                cfg.output_path.display()
            );
            Ok(0)
        }
        Command::Check => {
            let outcomes = check::run_all()?;
            for o in &outcomes {
                println!("{o}");
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
