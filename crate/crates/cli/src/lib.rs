//! Experiment driver for the asyncq solvers: config parsing, environment
//! construction, solver dispatch and CSV output.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::Path;

pub use config::{parse_config, Algorithm, ConfigError, EnvKind, ExperimentConfig};
pub use experiment::{run_benchmark, run_evaluate, run_experiment, run_validate, RunSummary};

/// Environment variable that overrides `threads` after the file and flags.
pub const THREADS_ENV: &str = "ASYNCQ_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Pairs up `--key value` and `--key=value` arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument `{arg}`")));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("`--{flag}` needs a value")))?;
                (flag.to_string(), v.clone())
            }
        };
        if key.is_empty() {
            return Err(CliError::Usage(format!("malformed flag `{arg}`")));
        }
        out.push((key, value));
    }
    Ok(out)
}

/// Defaults, then the config file, then flag overrides, then
/// [`THREADS_ENV`]; validated at the end.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
    env_threads: Option<&str>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        config::apply_text(&mut cfg, &text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    }
    for (k, v) in overrides {
        cfg.set(k, v, None)
            .map_err(|e| CliError::Validation(format!("--{k}: {e}")))?;
    }
    if let Some(t) = env_threads {
        cfg.set("threads", t.trim(), None)
            .map_err(|e| CliError::Validation(format!("{THREADS_ENV}: {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
