use std::time::Duration;

use crate::mdp::{ActionId, StateId};
use crate::theory::AsynchronismBound;

/// One update attempt, as seen by the worker that made it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommitRecord {
    /// 1-based iteration number (the ticket the worker claimed).
    pub iteration: u64,
    pub worker: usize,
    pub state: StateId,
    pub action: ActionId,
    pub q: f64,
    pub accepted: bool,
    /// Value of the state right after the attempt.
    pub value_after: f64,
    /// Write sequence number of the state; meaningful for accepted commits.
    pub seq: u64,
    /// Counter value when the snapshot used for `q` was taken.
    pub snapshot_at: u64,
}

#[derive(Clone, Debug, Default)]
pub struct AsyncRunStats {
    pub iterations_done: u64,
    /// Solver time, excluding checkpoint pauses.
    pub wall_time: Duration,
    /// Per state, the last iteration in which one of its pairs was updated
    /// (0 if never).
    pub last_update: Vec<u64>,
    /// Longest stretch between consecutive updates of a state-action pair,
    /// counting the stretches before the first and after the last update.
    pub observed_b1: u64,
    /// Largest `counter at commit − snapshot counter + 1` over all updates.
    pub observed_b2: u64,
    pub updates_accepted: u64,
    pub updates_rejected: u64,
    pub samples_drawn: u64,
    pub num_threads: usize,
    /// `K` when it was the same for every update.
    pub samples_per_update: Option<u64>,
    /// Filled when the run was asked to record commits; sorted by iteration.
    pub commits: Vec<CommitRecord>,
}

impl AsyncRunStats {
    pub fn observed_bounds(&self) -> AsynchronismBound {
        AsynchronismBound {
            b1: self.observed_b1.max(1),
            b2: self.observed_b2.max(1),
        }
    }

    pub fn iterations_per_second(&self) -> f64 {
        self.iterations_done as f64 / self.wall_time.as_secs_f64().max(1e-9)
    }

    pub fn samples_per_second(&self) -> f64 {
        self.samples_drawn as f64 / self.wall_time.as_secs_f64().max(1e-9)
    }
}
