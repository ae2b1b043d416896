//! Builds environments, runs solvers and writes results.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asyncq_core::eval::{
    evaluate_policy, speedup_benchmark, EvalConfig, EvalError, EvaluationReport, SpeedupRow,
    MAX_BENCHMARK_THREADS,
};
use asyncq_core::mdp::{parse_mdp, parse_policy, random_mdp, write_policy};
use asyncq_core::oracle::{optimality_gap_against, value_iteration_exact};
use asyncq_core::sailing::{sailing_tabularize, Sailing, SailingConfig};
use asyncq_core::solver::{
    aql_run_with, asyncqvi_run_exact_with, asyncqvi_run_with, Checkpoint, RunOutput, SolverConfig,
    StepSchedule,
};
use asyncq_core::{validate_mdp, GenerativeModel, Policy, TabularMdp, ValueVector};

use crate::config::{Algorithm, EnvKind, ExperimentConfig};
use crate::output::{benchmark_csv, meta_text, results_csv, ResultRow};
use crate::CliError;

/// Tolerance of the reference solve behind `sup_gap`.
const REFERENCE_TOL: f64 = 1e-8;

enum Env {
    Sailing { train: Sailing, eval: Sailing },
    Tabular(TabularMdp),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Reads, parses and validates an MDP file.
pub fn load_mdp(path: &Path) -> Result<TabularMdp, CliError> {
    let invalid = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    let mdp = parse_mdp(&read(path)?).map_err(|e| invalid(e.to_string()))?;
    validate_mdp(&mdp).map_err(|e| invalid(e.to_string()))?;
    Ok(mdp)
}

fn sailing_config(cfg: &ExperimentConfig) -> SailingConfig {
    SailingConfig {
        d: cfg.d,
        sigma1: cfg.sigma1,
        sigma2: cfg.sigma2,
        vortex_p: cfg.vortex_p,
        ..SailingConfig::new(cfg.grid_size)
    }
}

impl Env {
    fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let invalid = |e: String| CliError::Validation(e);
        Ok(match cfg.env {
            EnvKind::Sailing => {
                let train_cfg = sailing_config(cfg);
                let eval_cfg = SailingConfig {
                    sigma1: cfg.eval_sigma1.unwrap_or(cfg.sigma1),
                    sigma2: cfg.eval_sigma2.unwrap_or(cfg.sigma2),
                    vortex_p: cfg.eval_vortex_p.unwrap_or(cfg.vortex_p),
                    ..train_cfg.clone()
                };
                Env::Sailing {
                    train: Sailing::new(train_cfg).map_err(|e| invalid(e.to_string()))?,
                    eval: Sailing::new(eval_cfg).map_err(|e| invalid(e.to_string()))?,
                }
            }
            EnvKind::RandomMdp => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.mdp_seed);
                let mdp = random_mdp(cfg.num_states, cfg.num_actions, cfg.density, cfg.gamma, &mut rng);
                validate_mdp(&mdp).map_err(|e| invalid(e.to_string()))?;
                Env::Tabular(mdp)
            }
            EnvKind::File => Env::Tabular(load_mdp(cfg.mdp_path.as_deref().unwrap())?),
        })
    }

    /// Discount used by the solvers: a model file carries its own.
    fn gamma(&self, cfg: &ExperimentConfig) -> f64 {
        match self {
            Env::Tabular(mdp) if cfg.env == EnvKind::File => mdp.gamma(),
            _ => cfg.gamma,
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Env::Sailing { train, .. } => (train.num_states(), train.num_actions()),
            Env::Tabular(m) => (m.num_states(), m.num_actions()),
        }
    }

    /// The explicit model, tabularizing sailing if needed.
    fn tabular(&self, gamma: f64) -> Result<TabularMdp, CliError> {
        match self {
            Env::Sailing { train, .. } => sailing_tabularize(train.config(), gamma)
                .map_err(|e| CliError::Runtime(e.to_string())),
            Env::Tabular(m) => Ok(m.clone()),
        }
    }

    fn evaluate(&self, policy: &Policy, eval: &EvalConfig, seed: u64) -> Result<EvaluationReport, EvalError> {
        // Workers use streams 0..threads; evaluation gets its own.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        match self {
            Env::Sailing { eval: gm, .. } => evaluate_policy(gm, policy, eval, &mut rng),
            Env::Tabular(m) => evaluate_policy(m, policy, eval, &mut rng),
        }
    }
}

fn eval_config(cfg: &ExperimentConfig) -> EvalConfig {
    EvalConfig {
        episodes: cfg.eval_episodes,
        horizon: cfg.eval_horizon,
        gamma_eval: cfg.eval_gamma,
    }
}

fn solver_config(cfg: &ExperimentConfig, gamma: f64) -> SolverConfig {
    SolverConfig {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        gamma,
        num_threads: cfg.threads,
        iterations: cfg.l,
        samples: cfg.k.schedule(),
        selector: cfg.selector,
        copy_period: cfg.copy_period,
        seed: cfg.seed,
        checkpoint_every: cfg.eval_every,
        record_commits: false,
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

/// What a solve produced, besides the files it wrote.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<ResultRow>,
    pub policy: Policy,
    /// The resolved settings and run statistics written to the `.meta` file.
    pub meta: Vec<(String, String)>,
}

fn meta_path(output: &Path) -> PathBuf {
    let mut p = output.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

fn set_meta(meta: &mut Vec<(String, String)>, key: &str, value: String) {
    match meta.iter_mut().find(|(k, _)| k == key) {
        Some(entry) => entry.1 = value,
        None => meta.push((key.to_string(), value)),
    }
}

/// Runs the configured solver, evaluating the policy at every checkpoint,
/// and writes the CSV, its `.meta` sidecar and the optional policy file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let env = Env::build(cfg)?;
    let gamma = env.gamma(cfg);
    let solver_cfg = solver_config(cfg, gamma);
    solver_cfg.validate().map_err(invalid)?;
    // Fail on an unwritable destination before spending time on the solve.
    write(&cfg.output_path, "")?;

    let reference: Option<ValueVector> = match &env {
        Env::Tabular(m) => Some(
            value_iteration_exact(m, REFERENCE_TOL)
                .map_err(|e| CliError::Runtime(e.to_string()))?
                .v_star,
        ),
        Env::Sailing { .. } => None,
    };
    let tabular = match cfg.algorithm {
        Algorithm::AsyncQviExact | Algorithm::OracleVi => Some(env.tabular(gamma)?),
        _ => None,
    };
    let gap = |policy: &Policy| -> Option<f64> {
        match (&env, &reference) {
            (Env::Tabular(m), Some(v)) => optimality_gap_against(m, v, policy).ok(),
            _ => None,
        }
    };
    let eval = eval_config(cfg);
    let row = |iterations, wall_time, samples_drawn, report: &EvaluationReport, policy: &Policy| ResultRow {
        checkpoint_iterations: iterations,
        wall_time,
        samples_drawn,
        mean_return: report.mean_return,
        flags: report.flags,
        sup_gap: gap(policy),
        threads: cfg.threads,
        seed: cfg.seed,
        algorithm: cfg.algorithm.name(),
    };

    let mut rows = Vec::new();
    let mut meta = cfg.to_lines();
    set_meta(&mut meta, "gamma", gamma.to_string());
    let (ns, na) = env.shape();
    meta.push(("num_states_resolved".into(), ns.to_string()));
    meta.push(("num_actions_resolved".into(), na.to_string()));

    let policy = if cfg.algorithm == Algorithm::OracleVi {
        let mdp = tabular.as_ref().unwrap();
        let tol = cfg.epsilon * (1.0 - gamma) / 2.0;
        let started = Instant::now();
        let sol = value_iteration_exact(mdp, tol).map_err(|e| CliError::Runtime(e.to_string()))?;
        let wall = started.elapsed();
        let report = env.evaluate(&sol.pi_star, &eval, cfg.seed).map_err(invalid)?;
        rows.push(row(sol.iterations as u64, wall, 0, &report, &sol.pi_star));
        set_meta(&mut meta, "L", sol.iterations.to_string());
        meta.push(("oracle_tol".into(), tol.to_string()));
        meta.push(("oracle_residual".into(), sol.residual.to_string()));
        sol.pi_star
    } else {
        let mut eval_error = None;
        let mut observer = |c: &Checkpoint| match env.evaluate(&c.policy, &eval, cfg.seed) {
            Ok(report) => rows.push(row(c.iterations, c.wall_time, c.samples_drawn, &report, &c.policy)),
            Err(e) => {
                eval_error.get_or_insert(e);
            }
        };
        let out: RunOutput = match (&env, cfg.algorithm) {
            (_, Algorithm::AsyncQviExact) => {
                asyncqvi_run_exact_with(tabular.as_ref().unwrap(), &solver_cfg, &mut observer)
            }
            (Env::Sailing { train, .. }, alg) => dispatch(train, alg, cfg, &solver_cfg, &mut observer),
            (Env::Tabular(m), alg) => dispatch(m, alg, cfg, &solver_cfg, &mut observer),
        }
        .map_err(invalid)?;
        if let Some(e) = eval_error {
            return Err(invalid(e));
        }
        let s = &out.stats;
        set_meta(&mut meta, "L", s.iterations_done.to_string());
        match cfg.algorithm {
            Algorithm::AsyncQvi => {
                if let Some(k) = s.samples_per_update {
                    set_meta(&mut meta, "K", k.to_string());
                }
            }
            Algorithm::Aqlc | Algorithm::Aqld | Algorithm::AqlAdaptive => {
                set_meta(&mut meta, "K", "1".into())
            }
            _ => {}
        }
        let b = s.observed_bounds();
        for (k, v) in [
            ("observed_B1", b.b1),
            ("observed_B2", b.b2),
            ("iterations_done", s.iterations_done),
            ("samples_drawn", s.samples_drawn),
            ("updates_accepted", s.updates_accepted),
            ("updates_rejected", s.updates_rejected),
        ] {
            meta.push((k.into(), v.to_string()));
        }
        out.policy
    };

    write(&cfg.output_path, &results_csv(&rows))?;
    write(&meta_path(&cfg.output_path), &meta_text(&meta))?;
    if let Some(p) = &cfg.policy_path {
        write(p, &write_policy(&policy))?;
    }
    Ok(RunSummary { rows, policy, meta })
}

fn dispatch<G: GenerativeModel>(
    gm: &G,
    alg: Algorithm,
    cfg: &ExperimentConfig,
    solver_cfg: &SolverConfig,
    observer: &mut dyn FnMut(&Checkpoint),
) -> Result<RunOutput, asyncq_core::solver::SolverError> {
    let step = match alg {
        Algorithm::AsyncQvi => return asyncqvi_run_with(gm, solver_cfg, observer),
        Algorithm::Aqlc => StepSchedule::Constant(cfg.alpha),
        Algorithm::Aqld => StepSchedule::DIMINISHING,
        Algorithm::AqlAdaptive => StepSchedule::ADAPTIVE,
        Algorithm::AsyncQviExact | Algorithm::OracleVi => unreachable!("handled by the caller"),
    };
    aql_run_with(gm, solver_cfg, step, observer)
}

/// Evaluates a saved policy; returns the report as a one-row CSV.
pub fn run_evaluate(cfg: &ExperimentConfig, policy_path: &Path) -> Result<String, CliError> {
    let env = Env::build(cfg)?;
    let policy = parse_policy(&read(policy_path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", policy_path.display())))?;
    let report = env.evaluate(&policy, &eval_config(cfg), cfg.seed).map_err(invalid)?;
    let reference = match &env {
        Env::Tabular(m) => Some(
            value_iteration_exact(m, REFERENCE_TOL)
                .map_err(|e| CliError::Runtime(e.to_string()))?
                .v_star,
        ),
        Env::Sailing { .. } => None,
    };
    let gap = match (&env, reference) {
        (Env::Tabular(m), Some(v)) => optimality_gap_against(m, &v, &policy)
            .map_err(invalid)?
            .to_string(),
        _ => String::new(),
    };
    Ok(format!(
        "episodes,mean_return,std_error,flags,sup_gap\n{},{},{},{},{}\n",
        report.episodes,
        report.mean_return,
        report.std_error(),
        report.flags,
        gap
    ))
}

/// Sampled AsyncQVI at each thread count with one fixed budget; returns the
/// rows as CSV.
pub fn run_benchmark(cfg: &ExperimentConfig, thread_counts: &[usize]) -> Result<(Vec<SpeedupRow>, String), CliError> {
    let env = Env::build(cfg)?;
    let solver_cfg = solver_config(cfg, env.gamma(cfg));
    solver_cfg.validate().map_err(invalid)?;
    let (ns, na) = env.shape();
    let l = solver_cfg.resolved_iterations(ns, na).map_err(invalid)?;
    let rows = match &env {
        Env::Sailing { train, .. } => speedup_benchmark(train, &solver_cfg, thread_counts, l, MAX_BENCHMARK_THREADS),
        Env::Tabular(m) => speedup_benchmark(m, &solver_cfg, thread_counts, l, MAX_BENCHMARK_THREADS),
    }
    .map_err(invalid)?;
    let csv = benchmark_csv(&rows);
    Ok((rows, csv))
}

/// Checks the config and, when there is one, the model file.
pub fn run_validate(cfg: &ExperimentConfig, mdp_path: Option<&Path>) -> Result<String, CliError> {
    let path = mdp_path.or(match cfg.env {
        EnvKind::File => cfg.mdp_path.as_deref(),
        _ => None,
    });
    match path {
        Some(p) => {
            let mdp = load_mdp(p)?;
            Ok(format!(
                "ok: {} states, {} actions, {} transitions\n",
                mdp.num_states(),
                mdp.num_actions(),
                mdp.nnz()
            ))
        }
        None => Ok("ok\n".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn oracle_policy_is_within_epsilon() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let text = format!(
            "algorithm = oracle_vi\nenv = random_mdp\ngamma = 0.9\nepsilon = 0.1\noutput_path = {}\n",
            out.display()
        );
        let run = run_experiment(&parse_config(&text).unwrap()).unwrap();
        assert_eq!(run.rows.len(), 1);
        assert!(run.rows[0].sup_gap.unwrap() <= 0.1);
        assert!(meta_path(&out).exists());
    }

    #[test]
    fn checkpoints_follow_eval_every() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "algorithm = aqlc\nenv = random_mdp\ngamma = 0.9\nL = 1000\neval_every = 250\neval_episodes = 5\noutput_path = {}\n",
            dir.path().join("r.csv").display()
        );
        let run = run_experiment(&parse_config(&text).unwrap()).unwrap();
        let its: Vec<u64> = run.rows.iter().map(|r| r.checkpoint_iterations).collect();
        assert_eq!(its, vec![250, 500, 750, 1000]);
        assert_eq!(run.rows[3].samples_drawn, 1000);
    }
}
