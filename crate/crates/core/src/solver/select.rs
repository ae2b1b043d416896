use rand::Rng;

use crate::mdp::{ActionId, GenerativeModel, StateId};

/// How workers pick the state-action pair to update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Selector {
    /// Independent uniform draws over all pairs.
    #[default]
    Uniform,
    /// Pairs are split into one contiguous block per worker; each worker
    /// sweeps its block in index order and wraps around.
    Cyclic,
    /// Follow a sampled trajectory with uniform actions, restarting from a
    /// uniform state every [`TRAJECTORY_RESTART`] steps.
    Trajectory,
}

/// Steps between uniform restarts of the trajectory selector.
pub const TRAJECTORY_RESTART: u64 = 200;

#[derive(Clone, Debug)]
enum State {
    Uniform,
    Cyclic { start: usize, len: usize, pos: usize },
    Trajectory { state: StateId, steps: u64 },
}

/// Per-worker coordinate selection state.
#[derive(Clone, Debug)]
pub struct CoordinateSelector {
    state: State,
    num_states: usize,
    num_actions: usize,
    samples_drawn: u64,
}

impl CoordinateSelector {
    pub fn new<R: Rng + ?Sized>(
        selector: Selector,
        worker: usize,
        num_workers: usize,
        num_states: usize,
        num_actions: usize,
        rng: &mut R,
    ) -> Self {
        let n = num_states * num_actions;
        let state = match selector {
            Selector::Uniform => State::Uniform,
            Selector::Cyclic => {
                let lo = worker * n / num_workers;
                let hi = (worker + 1) * n / num_workers;
                if hi > lo {
                    State::Cyclic {
                        start: lo,
                        len: hi - lo,
                        pos: 0,
                    }
                } else {
                    // More workers than pairs: sweep everything from an offset.
                    State::Cyclic {
                        start: 0,
                        len: n,
                        pos: worker % n,
                    }
                }
            }
            Selector::Trajectory => State::Trajectory {
                state: StateId(rng.gen_range(0..num_states)),
                steps: 0,
            },
        };
        Self {
            state,
            num_states,
            num_actions,
            samples_drawn: 0,
        }
    }

    /// Generative-model calls made by the selector itself.
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    pub fn next<G, R>(&mut self, gm: &G, rng: &mut R) -> (StateId, ActionId)
    where
        G: GenerativeModel + ?Sized,
        R: Rng + ?Sized,
    {
        match &mut self.state {
            State::Uniform => {
                let p = rng.gen_range(0..self.num_states * self.num_actions);
                (StateId(p / self.num_actions), ActionId(p % self.num_actions))
            }
            State::Cyclic { start, len, pos } => {
                let p = *start + *pos;
                *pos = (*pos + 1) % *len;
                (StateId(p / self.num_actions), ActionId(p % self.num_actions))
            }
            State::Trajectory { state, steps } => {
                if *steps == TRAJECTORY_RESTART {
                    *state = StateId(rng.gen_range(0..self.num_states));
                    *steps = 0;
                }
                let i = *state;
                let a = ActionId(rng.gen_range(0..self.num_actions));
                *state = gm.sample(i, a, rng).next;
                *steps += 1;
                self.samples_drawn += 1;
                (i, a)
            }
        }
    }
}
