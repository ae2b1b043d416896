//! Rollout evaluation of policies and thread-scaling measurements.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{GenerativeModel, Policy, StateId};
use crate::solver::{asyncqvi_run, SolverConfig, SolverError};

/// Default thread-count ceiling for [`speedup_benchmark`].
pub const MAX_BENCHMARK_THREADS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("policy covers {found} states, model has {expected}")]
    PolicyLength { expected: usize, found: usize },
    #[error("policy picks action {action} in state {state}, model has {num_actions} actions")]
    ActionOutOfRange {
        state: usize,
        action: usize,
        num_actions: usize,
    },
    #[error("episodes and horizon must be at least 1")]
    EmptyEvaluation,
    #[error("thread count {requested} exceeds the limit of {limit}")]
    TooManyThreads { requested: usize, limit: usize },
    #[error("thread counts must be nonempty and positive")]
    ThreadCounts,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub gamma_eval: f64,
}

impl Default for EvalConfig {
    /// 100 episodes of 200 steps, discounted by 0.99.
    fn default() -> Self {
        Self {
            episodes: 100,
            horizon: 200,
            gamma_eval: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub episodes: usize,
    pub horizon: usize,
    pub gamma_eval: f64,
    pub mean_return: f64,
    pub returns: Vec<f64>,
    /// Episodes that visited a target state.
    pub flags: usize,
}

impl EvaluationReport {
    /// Standard error of the mean return.
    pub fn std_error(&self) -> f64 {
        let n = self.returns.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let var = self
            .returns
            .iter()
            .map(|r| (r - self.mean_return).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Discounted return of `horizon` steps of `policy` from `start`, and whether
/// any visited state (start and final included) is a target.
pub fn rollout<G, R>(
    gm: &G,
    policy: &Policy,
    start: StateId,
    horizon: usize,
    gamma_eval: f64,
    rng: &mut R,
) -> (f64, bool)
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let mut state = start;
    let mut flag = gm.is_target(state);
    let mut ret = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        let t = gm.sample(state, policy.action(state), rng);
        ret += discount * t.reward;
        discount *= gamma_eval;
        state = t.next;
        flag |= gm.is_target(state);
    }
    (ret, flag)
}

/// Rollouts from uniformly drawn non-target start states.
pub fn evaluate_policy<G, R>(
    gm: &G,
    policy: &Policy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> Result<EvaluationReport, EvalError>
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let n = gm.num_states();
    if policy.len() != n {
        return Err(EvalError::PolicyLength {
            expected: n,
            found: policy.len(),
        });
    }
    if let Some((state, a)) = policy.0.iter().enumerate().find(|(_, a)| a.0 >= gm.num_actions()) {
        return Err(EvalError::ActionOutOfRange {
            state,
            action: a.0,
            num_actions: gm.num_actions(),
        });
    }
    if cfg.episodes == 0 || cfg.horizon == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    let starts: Vec<usize> = (0..n).filter(|&i| !gm.is_target(StateId(i))).collect();
    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut flags = 0;
    for _ in 0..cfg.episodes {
        let start = if starts.is_empty() {
            rng.gen_range(0..n)
        } else {
            starts[rng.gen_range(0..starts.len())]
        };
        let (r, flag) = rollout(gm, policy, StateId(start), cfg.horizon, cfg.gamma_eval, rng);
        returns.push(r);
        flags += flag as usize;
    }
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(EvaluationReport {
        episodes: cfg.episodes,
        horizon: cfg.horizon,
        gamma_eval: cfg.gamma_eval,
        mean_return,
        returns,
        flags,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupRow {
    pub threads: usize,
    pub iterations: u64,
    pub wall_time: Duration,
    pub iterations_per_second: f64,
    pub samples_per_second: f64,
}

/// `baseline / row` wall-time ratios, relative to the first row.
pub fn speedups(rows: &[SpeedupRow]) -> Vec<f64> {
    let Some(base) = rows.first() else {
        return Vec::new();
    };
    rows.iter()
        .map(|r| base.wall_time.as_secs_f64() / r.wall_time.as_secs_f64().max(1e-12))
        .collect()
}

/// Runs sampled AsyncQVI once per thread count with the same budget
/// `fixed_iterations` and a fresh seed per row. Rows come back in ascending
/// thread order.
pub fn speedup_benchmark<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    thread_counts: &[usize],
    fixed_iterations: u64,
    max_threads: usize,
) -> Result<Vec<SpeedupRow>, EvalError> {
    if thread_counts.is_empty() || thread_counts.contains(&0) {
        return Err(EvalError::ThreadCounts);
    }
    let mut counts = thread_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if let Some(&t) = counts.iter().find(|&&t| t > max_threads) {
        return Err(EvalError::TooManyThreads {
            requested: t,
            limit: max_threads,
        });
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(counts.len());
    for threads in counts {
        let run_cfg = SolverConfig {
            num_threads: threads,
            iterations: fixed_iterations,
            seed: seeds.gen(),
            checkpoint_every: 0,
            record_commits: false,
            ..cfg.clone()
        };
        let out = asyncqvi_run(gm, &run_cfg)?;
        rows.push(SpeedupRow {
            threads,
            iterations: out.stats.iterations_done,
            wall_time: out.stats.wall_time,
            iterations_per_second: out.stats.iterations_per_second(),
            samples_per_second: out.stats.samples_per_second(),
        });
    }
    Ok(rows)
}
