//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;

use asyncq_core::solver::{SampleSchedule, Selector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    AsyncQvi,
    AsyncQviExact,
    Aqlc,
    Aqld,
    AqlAdaptive,
    OracleVi,
}

impl Algorithm {
    const ALL: [(&'static str, Algorithm); 6] = [
        ("asyncqvi", Algorithm::AsyncQvi),
        ("asyncqvi_exact", Algorithm::AsyncQviExact),
        ("aqlc", Algorithm::Aqlc),
        ("aqld", Algorithm::Aqld),
        ("aql_adaptive", Algorithm::AqlAdaptive),
        ("oracle_vi", Algorithm::OracleVi),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, a)| *a == self).unwrap().0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Sailing,
    RandomMdp,
    File,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Sailing => "sailing",
            EnvKind::RandomMdp => "random_mdp",
            EnvKind::File => "file",
        }
    }
}

/// Samples per update as written in a config: 0 for the theorem bound, a
/// fixed count, or the adaptive schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplesSetting {
    Fixed(u64),
    Adaptive,
}

impl SamplesSetting {
    pub fn schedule(self) -> SampleSchedule {
        match self {
            SamplesSetting::Fixed(0) => SampleSchedule::Theorem,
            SamplesSetting::Fixed(k) => SampleSchedule::Constant(k),
            SamplesSetting::Adaptive => SampleSchedule::ADAPTIVE,
        }
    }
}

impl fmt::Display for SamplesSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplesSetting::Fixed(k) => write!(f, "{k}"),
            SamplesSetting::Adaptive => f.write_str("adaptive"),
        }
    }
}

fn selector_name(s: Selector) -> &'static str {
    match s {
        Selector::Uniform => "uniform",
        Selector::Cyclic => "cyclic",
        Selector::Trajectory => "trajectory",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub threads: usize,
    /// Iteration budget; 0 selects the theorem bound.
    pub l: u64,
    pub k: SamplesSetting,
    /// Constant step size for `aqlc`.
    pub alpha: f64,
    pub selector: Selector,
    pub copy_period: u64,
    pub seed: u64,
    pub grid_size: usize,
    pub d: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub vortex_p: f64,
    pub num_states: usize,
    pub num_actions: usize,
    pub density: f64,
    /// Seed of the generated `random_mdp` instance, kept apart from the
    /// solver seed so seeded trials share one model.
    pub mdp_seed: u64,
    pub mdp_path: Option<PathBuf>,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    pub eval_gamma: f64,
    /// Noise used by evaluation rollouts on sailing; `None` reuses the
    /// training value.
    pub eval_sigma1: Option<f64>,
    pub eval_sigma2: Option<f64>,
    pub eval_vortex_p: Option<f64>,
    /// Iterations between evaluation checkpoints; 0 evaluates once at the end.
    pub eval_every: u64,
    pub output_path: PathBuf,
    /// Where to save the final policy, if anywhere.
    pub policy_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AsyncQvi,
            env: EnvKind::Sailing,
            gamma: 0.99,
            epsilon: 0.1,
            delta: 0.1,
            threads: 1,
            l: 0,
            k: SamplesSetting::Fixed(0),
            alpha: 0.1,
            selector: Selector::Uniform,
            copy_period: 1,
            seed: 0,
            grid_size: 20,
            d: 0.05,
            sigma1: 0.5,
            sigma2: 2.0,
            vortex_p: 0.05,
            num_states: 10,
            num_actions: 3,
            density: 0.5,
            mdp_seed: 0,
            mdp_path: None,
            eval_episodes: 100,
            eval_horizon: 200,
            eval_gamma: 0.99,
            eval_sigma1: None,
            eval_sigma2: None,
            eval_vortex_p: None,
            eval_every: 0,
            output_path: PathBuf::from("results.csv"),
            policy_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{}unknown key `{key}`", at(*.line))]
    UnknownKey { line: Option<usize>, key: String },
    #[error("{}invalid value `{value}` for `{key}`: {reason}", at(*.line))]
    Value {
        line: Option<usize>,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{}expected `key = value`", at(*.line))]
    Syntax { line: Option<usize> },
    #[error("{0}")]
    Inconsistent(String),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::UnknownKey { line, .. }
            | ConfigError::Value { line, .. }
            | ConfigError::Syntax { line } => *line,
            ConfigError::Inconsistent(_) => None,
        }
    }
}

struct Value<'a> {
    key: &'a str,
    raw: &'a str,
    line: Option<usize>,
}

impl Value<'_> {
    fn err(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line: self.line,
            key: self.key.to_string(),
            value: self.raw.to_string(),
            reason: reason.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self) -> Result<T, ConfigError> {
        self.raw.parse().map_err(|_| self.err("not a valid number"))
    }

    fn real(&self, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64, ConfigError> {
        let x: f64 = self.parse()?;
        if x.is_finite() && ok(x) {
            Ok(x)
        } else {
            Err(self.err(format!("must be {range}")))
        }
    }

    fn count(&self, min: u64) -> Result<u64, ConfigError> {
        let x: u64 = self.parse()?;
        if x < min {
            return Err(self.err(format!("must be at least {min}")));
        }
        Ok(x)
    }

    fn choice<T: Copy>(&self, options: &[(&str, T)]) -> Result<T, ConfigError> {
        options
            .iter()
            .find(|(n, _)| *n == self.raw)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                self.err(format!("expected one of {}", names.join(", ")))
            })
    }
}

impl ExperimentConfig {
    /// Sets one key. Ranges that involve a single value are checked here;
    /// [`ExperimentConfig::validate`] checks the rest.
    pub fn set(&mut self, key: &str, raw: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let v = Value { key, raw, line };
        let prob = |x: f64| x > 0.0 && x < 1.0;
        match key {
            "algorithm" => self.algorithm = v.choice(&Algorithm::ALL)?,
            "env" => {
                self.env = v.choice(&[
                    ("sailing", EnvKind::Sailing),
                    ("random_mdp", EnvKind::RandomMdp),
                    ("file", EnvKind::File),
                ])?
            }
            "gamma" => self.gamma = v.real(prob, "in (0, 1)")?,
            "epsilon" => self.epsilon = v.real(|x| x > 0.0, "positive")?,
            "delta" => self.delta = v.real(prob, "in (0, 1)")?,
            "threads" => self.threads = v.count(1)? as usize,
            "L" => self.l = v.count(0)?,
            "K" => {
                self.k = if raw == "adaptive" {
                    SamplesSetting::Adaptive
                } else {
                    SamplesSetting::Fixed(v.count(0)?)
                }
            }
            "alpha" => self.alpha = v.real(|x| x > 0.0 && x <= 1.0, "in (0, 1]")?,
            "selector" => {
                self.selector = v.choice(&[
                    ("uniform", Selector::Uniform),
                    ("cyclic", Selector::Cyclic),
                    ("trajectory", Selector::Trajectory),
                ])?
            }
            "copy_period" => self.copy_period = v.count(1)?,
            "seed" => self.seed = v.parse()?,
            "grid_size" => self.grid_size = v.count(1)? as usize,
            "d" => self.d = v.real(|x| x >= 0.0, "nonnegative")?,
            "sigma1" => self.sigma1 = v.real(|x| x >= 0.0, "nonnegative")?,
            "sigma2" => self.sigma2 = v.real(|x| x >= 0.0, "nonnegative")?,
            "vortex_p" => self.vortex_p = v.real(|x| (0.0..=1.0).contains(&x), "in [0, 1]")?,
            "num_states" => self.num_states = v.count(1)? as usize,
            "num_actions" => self.num_actions = v.count(1)? as usize,
            "density" => self.density = v.real(|x| x > 0.0 && x <= 1.0, "in (0, 1]")?,
            "mdp_seed" => self.mdp_seed = v.parse()?,
            "mdp_path" => self.mdp_path = Some(PathBuf::from(raw)),
            "eval_episodes" => self.eval_episodes = v.count(1)? as usize,
            "eval_horizon" => self.eval_horizon = v.count(1)? as usize,
            "eval_gamma" => self.eval_gamma = v.real(|x| x > 0.0 && x <= 1.0, "in (0, 1]")?,
            "eval_sigma1" => self.eval_sigma1 = Some(v.real(|x| x >= 0.0, "nonnegative")?),
            "eval_sigma2" => self.eval_sigma2 = Some(v.real(|x| x >= 0.0, "nonnegative")?),
            "eval_vortex_p" => {
                self.eval_vortex_p = Some(v.real(|x| (0.0..=1.0).contains(&x), "in [0, 1]")?)
            }
            "eval_every" => self.eval_every = v.count(0)?,
            "output_path" => self.output_path = PathBuf::from(raw),
            "policy_path" => self.policy_path = Some(PathBuf::from(raw)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Cross-key checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Inconsistent(m));
        if self.env != EnvKind::File && self.epsilon * (1.0 - self.gamma) >= 1.0 {
            return bad(format!(
                "epsilon {} must be below 1/(1-gamma) = {}",
                self.epsilon,
                1.0 / (1.0 - self.gamma)
            ));
        }
        if self.env == EnvKind::File && self.mdp_path.is_none() {
            return bad("env = file needs mdp_path".into());
        }
        if self.env == EnvKind::Sailing && self.grid_size < 2 {
            return bad("grid_size must be at least 2".into());
        }
        Ok(())
    }

    /// Resolved settings as `key = value` lines, in a fixed order.
    pub fn to_lines(&self) -> Vec<(String, String)> {
        let opt = |x: Option<f64>| x.map_or_else(|| "same".to_string(), |v| v.to_string());
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        vec![
            ("algorithm".into(), self.algorithm.name().into()),
            ("env".into(), self.env.name().into()),
            ("gamma".into(), self.gamma.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("delta".into(), self.delta.to_string()),
            ("threads".into(), self.threads.to_string()),
            ("L".into(), self.l.to_string()),
            ("K".into(), self.k.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("selector".into(), selector_name(self.selector).into()),
            ("copy_period".into(), self.copy_period.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("grid_size".into(), self.grid_size.to_string()),
            ("d".into(), self.d.to_string()),
            ("sigma1".into(), self.sigma1.to_string()),
            ("sigma2".into(), self.sigma2.to_string()),
            ("vortex_p".into(), self.vortex_p.to_string()),
            ("num_states".into(), self.num_states.to_string()),
            ("num_actions".into(), self.num_actions.to_string()),
            ("density".into(), self.density.to_string()),
            ("mdp_seed".into(), self.mdp_seed.to_string()),
            ("mdp_path".into(), path(&self.mdp_path)),
            ("eval_episodes".into(), self.eval_episodes.to_string()),
            ("eval_horizon".into(), self.eval_horizon.to_string()),
            ("eval_gamma".into(), self.eval_gamma.to_string()),
            ("eval_sigma1".into(), opt(self.eval_sigma1)),
            ("eval_sigma2".into(), opt(self.eval_sigma2)),
            ("eval_vortex_p".into(), opt(self.eval_vortex_p)),
            ("eval_every".into(), self.eval_every.to_string()),
            ("output_path".into(), self.output_path.display().to_string()),
            ("policy_path".into(), path(&self.policy_path)),
        ]
    }
}

/// Splits one content line into key and value, or `None` for blank and
/// comment lines. Trailing `#` comments are stripped.
fn split_line(raw: &str) -> Option<Result<(&str, &str), ()>> {
    let line = raw.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    Some(match line.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(()),
    })
}

/// Applies a config document on top of `base`.
pub fn apply_text(base: &mut ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    for (n, raw) in text.lines().enumerate() {
        match split_line(raw) {
            None => {}
            Some(Err(())) => return Err(ConfigError::Syntax { line: Some(n + 1) }),
            Some(Ok((k, v))) => base.set(k, v, Some(n + 1))?,
        }
    }
    Ok(())
}

/// Parses and validates a config document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    apply_text(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}
