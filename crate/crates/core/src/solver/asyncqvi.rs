use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::engine::{self, Kernel, Params, Step};
use super::schedule::SampleSchedule;
use super::shared::{conditional_commit, LocalSnapshot, SharedTable};
use super::{Checkpoint, RunOutput, SolverConfig, SolverError};
use crate::mdp::{ActionId, GenerativeModel, StateId, TabularMdp};

/// `K`-sample estimate of `r̄_i^a + γ p_i^a ⊤ v̂`, lowered by `(1 − γ) ε / 4`
/// when `correction` is set.
#[allow(clippy::too_many_arguments)]
pub fn compute_q_sample<G, R>(
    gm: &G,
    state: StateId,
    action: ActionId,
    v_hat: &[f64],
    k: u64,
    epsilon: f64,
    gamma: f64,
    correction: bool,
    rng: &mut R,
) -> f64
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let m = gm.sample_means(state, action, k.max(1), v_hat, rng);
    let q = m.reward + gamma * m.value;
    if correction {
        q - (1.0 - gamma) * epsilon / 4.0
    } else {
        q
    }
}

struct Sampled<'a, G> {
    gm: &'a G,
    samples: SampleSchedule,
    epsilon: f64,
    gamma: f64,
}

impl<G: GenerativeModel> Kernel for Sampled<'_, G> {
    #[inline]
    fn update(
        &self,
        shared: &SharedTable,
        state: StateId,
        action: ActionId,
        snapshot: &LocalSnapshot,
        iteration: u64,
        rng: &mut ChaCha8Rng,
    ) -> Step {
        let k = self.samples.at(iteration + 1).unwrap_or(1);
        let q = compute_q_sample(
            self.gm,
            state,
            action,
            &snapshot.v_hat,
            k,
            self.epsilon,
            self.gamma,
            true,
            rng,
        );
        Step {
            q,
            commit: conditional_commit(shared, state, action, q),
            samples: k,
        }
    }
}

struct Exact<'a> {
    mdp: &'a TabularMdp,
}

impl Kernel for Exact<'_> {
    #[inline]
    fn update(
        &self,
        shared: &SharedTable,
        state: StateId,
        action: ActionId,
        snapshot: &LocalSnapshot,
        _iteration: u64,
        _rng: &mut ChaCha8Rng,
    ) -> Step {
        let q = self.mdp.backup(state, action, &snapshot.v_hat);
        Step {
            q,
            commit: shared.commit_monotone_q(state, action, q),
            samples: 0,
        }
    }
}

fn params(cfg: &SolverConfig, iterations: u64, keep_q: bool, k: Option<u64>) -> Params {
    Params {
        num_threads: cfg.num_threads,
        iterations,
        selector: cfg.selector,
        copy_period: cfg.copy_period,
        seed: cfg.seed,
        checkpoint_every: cfg.checkpoint_every,
        record_commits: cfg.record_commits,
        keep_q,
        samples_per_update: k,
    }
}

/// Sampled AsyncQVI. Budgets left at 0 in `cfg` are taken from the theorem.
pub fn asyncqvi_run<G: GenerativeModel>(gm: &G, cfg: &SolverConfig) -> Result<RunOutput, SolverError> {
    run_sampled(gm, cfg, None)
}

/// [`asyncqvi_run`], reporting to `observer` every `cfg.checkpoint_every`
/// iterations and at the end.
pub fn asyncqvi_run_with<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&Checkpoint),
) -> Result<RunOutput, SolverError> {
    run_sampled(gm, cfg, Some(observer))
}

fn run_sampled<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    observer: Option<&mut dyn FnMut(&Checkpoint)>,
) -> Result<RunOutput, SolverError> {
    cfg.validate()?;
    let l = cfg.resolved_iterations(gm.num_states(), gm.num_actions())?;
    let samples = cfg.resolved_samples(l)?;
    let fixed_k = match samples {
        SampleSchedule::Constant(k) => Some(k.max(1)),
        _ => None,
    };
    let kernel = Sampled {
        gm,
        samples,
        epsilon: cfg.epsilon,
        gamma: cfg.gamma,
    };
    Ok(engine::run(gm, &kernel, &params(cfg, l, false, fixed_k), observer))
}

/// AsyncQVI with the sampled estimate replaced by the exact expectation
/// `r̄_i^a + γ p_i^a ⊤ v̂` and no accuracy correction. The discount comes from
/// `mdp`; `cfg.gamma` is ignored. The returned Q table holds, per pair, the
/// largest estimate computed so far.
pub fn asyncqvi_run_exact(mdp: &TabularMdp, cfg: &SolverConfig) -> Result<RunOutput, SolverError> {
    run_exact(mdp, cfg, None)
}

pub fn asyncqvi_run_exact_with(
    mdp: &TabularMdp,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&Checkpoint),
) -> Result<RunOutput, SolverError> {
    run_exact(mdp, cfg, Some(observer))
}

fn run_exact(
    mdp: &TabularMdp,
    cfg: &SolverConfig,
    observer: Option<&mut dyn FnMut(&Checkpoint)>,
) -> Result<RunOutput, SolverError> {
    let cfg = SolverConfig {
        gamma: mdp.gamma(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let l = cfg.resolved_iterations(mdp.num_states(), mdp.num_actions())?;
    let kernel = Exact { mdp };
    Ok(engine::run(mdp, &kernel, &params(&cfg, l, true, Some(0)), observer))
}
