use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::engine::{self, Kernel, Params, Step};
use super::schedule::StepSchedule;
use super::shared::{LocalSnapshot, SharedTable};
use super::{Checkpoint, RunOutput, SolverConfig, SolverError};
use crate::mdp::{ActionId, GenerativeModel, StateId};

/// One-sample target `r + γ v̂_j` for the pair `(i, a)`.
#[inline]
pub fn aql_target<G, R>(
    gm: &G,
    state: StateId,
    action: ActionId,
    v_hat: &[f64],
    gamma: f64,
    rng: &mut R,
) -> f64
where
    G: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    let t = gm.sample(state, action, rng);
    t.reward + gamma * v_hat[t.next.0]
}

struct QLearning<'a, G> {
    gm: &'a G,
    step: StepSchedule,
    gamma: f64,
}

impl<G: GenerativeModel> Kernel for QLearning<'_, G> {
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
        let target = aql_target(self.gm, state, action, &snapshot.v_hat, self.gamma, rng);
        let alpha = self.step.at(iteration + 1);
        Step {
            q: target,
            commit: shared.commit_relaxed_q(state, action, target, alpha),
            samples: 1,
        }
    }
}

/// Asynchronous Q-learning: `Q[i, a] ← (1 − α_t) Q[i, a] + α_t (r + γ v̂_j)`
/// with one sample per update. Keeps a full Q table. `cfg.samples` is
/// ignored; an iteration budget of 0 is filled from the theorem as for
/// AsyncQVI.
pub fn aql_run<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    step: StepSchedule,
) -> Result<RunOutput, SolverError> {
    run(gm, cfg, step, None)
}

pub fn aql_run_with<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    step: StepSchedule,
    observer: &mut dyn FnMut(&Checkpoint),
) -> Result<RunOutput, SolverError> {
    run(gm, cfg, step, Some(observer))
}

fn run<G: GenerativeModel>(
    gm: &G,
    cfg: &SolverConfig,
    step: StepSchedule,
    observer: Option<&mut dyn FnMut(&Checkpoint)>,
) -> Result<RunOutput, SolverError> {
    cfg.validate()?;
    step.validate().map_err(SolverError::Config)?;
    let l = cfg.resolved_iterations(gm.num_states(), gm.num_actions())?;
    let kernel = QLearning {
        gm,
        step,
        gamma: cfg.gamma,
    };
    let params = Params {
        num_threads: cfg.num_threads,
        iterations: l,
        selector: cfg.selector,
        copy_period: cfg.copy_period,
        seed: cfg.seed,
        checkpoint_every: cfg.checkpoint_every,
        record_commits: cfg.record_commits,
        keep_q: true,
        samples_per_update: Some(1),
    };
    Ok(engine::run(gm, &kernel, &params, observer))
}
