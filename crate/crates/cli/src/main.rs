use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asyncq_cli::{
    load_config, parse_overrides, run_benchmark, run_evaluate, run_experiment, run_validate,
    CliError, THREADS_ENV,
};

/// Asynchronous-parallel Q-value iteration experiments.
#[derive(Parser, Debug)]
#[command(name = "asyncq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `--key value` overrides of config keys.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured solver and write the results CSV.
    Solve(Common),
    /// Evaluate a saved policy.
    Evaluate {
        /// One action index per line.
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Time sampled AsyncQVI at several thread counts.
    Benchmark {
        /// Comma-separated thread counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        thread_counts: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a config and model file without running anything.
    Validate {
        /// Model file to check; defaults to the config's `mdp_path`.
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn config(common: &Common) -> Result<asyncq_cli::ExperimentConfig, CliError> {
    let overrides = parse_overrides(&common.overrides)?;
    let threads = std::env::var(THREADS_ENV).ok();
    load_config(common.config.as_deref(), &overrides, threads.as_deref())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(common) => {
            let cfg = config(&common)?;
            let run = run_experiment(&cfg)?;
            if let Some(last) = run.rows.last() {
                println!(
                    "{} iterations, mean return {:.4}, flags {}, wrote {}",
                    last.checkpoint_iterations,
                    last.mean_return,
                    last.flags,
                    cfg.output_path.display()
                );
            }
        }
        Command::Evaluate { policy, common } => {
            print!("{}", run_evaluate(&config(&common)?, &policy)?);
        }
        Command::Benchmark {
            thread_counts,
            common,
        } => {
            let (_, csv) = run_benchmark(&config(&common)?, &thread_counts)?;
            print!("{csv}");
        }
        Command::Validate { mdp, common } => {
            print!("{}", run_validate(&config(&common)?, mdp.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
