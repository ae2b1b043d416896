//! Shared-memory asynchronous solvers.
//!
//! All solvers run `num_threads` workers against one [`SharedTable`] holding
//! a value and a greedy action per state. Each worker repeatedly picks a
//! state-action pair, refreshes its private copy of the values every
//! `copy_period` iterations, computes a new estimate for the pair from that
//! possibly stale copy, commits it under the state's lock and bumps the
//! global iteration counter.

mod aql;
mod asyncqvi;
mod engine;
mod schedule;
mod select;
mod shared;
mod stats;

pub use aql::{aql_run, aql_run_with, aql_target};
pub use asyncqvi::{asyncqvi_run, asyncqvi_run_exact, asyncqvi_run_exact_with, asyncqvi_run_with, compute_q_sample};
pub use schedule::{SampleSchedule, StepSchedule};
pub use select::{CoordinateSelector, Selector, TRAJECTORY_RESTART};
pub use shared::{conditional_commit, snapshot_values, Commit, LocalSnapshot, SharedTable};
pub use stats::{AsyncRunStats, CommitRecord};

use std::time::Duration;

use thiserror::Error;

use crate::mdp::{Policy, QTable, ValueVector};
use crate::theory::{iteration_bound, sample_bound, AsynchronismBound, TheoryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Target accuracy, in `(0, 1/(1 − γ))`.
    pub epsilon: f64,
    /// Failure probability, in `(0, 1)`.
    pub delta: f64,
    pub gamma: f64,
    pub num_threads: usize,
    /// Iteration budget `L`; 0 selects the theorem bound.
    pub iterations: u64,
    /// Samples per update `K`.
    pub samples: SampleSchedule,
    pub selector: Selector,
    /// Workers refresh their value copy every this many iterations.
    pub copy_period: u64,
    pub seed: u64,
    /// Pause the workers and report progress every this many iterations
    /// (0 disables checkpoints).
    pub checkpoint_every: u64,
    /// Keep a record of every commit in the run statistics.
    pub record_commits: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.1,
            gamma: 0.9,
            num_threads: 1,
            iterations: 0,
            samples: SampleSchedule::Theorem,
            selector: Selector::Uniform,
            copy_period: 1,
            seed: 0,
            checkpoint_every: 0,
            record_commits: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} must lie in (0, 1)", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon * (1.0 - self.gamma) < 1.0) {
            return bad(format!(
                "epsilon {} must lie in (0, 1/(1-gamma))",
                self.epsilon
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} must lie in (0, 1)", self.delta));
        }
        if self.num_threads == 0 {
            return bad("num_threads must be at least 1".into());
        }
        if self.copy_period == 0 {
            return bad("copy_period must be at least 1".into());
        }
        self.samples.validate().map_err(SolverError::Config)?;
        Ok(())
    }

    /// Asynchronism constants assumed when budgets come from the theorem:
    /// `B1 = |S||A|`, `B2 = num_threads + copy_period`.
    pub fn default_bounds(&self, num_states: usize, num_actions: usize) -> AsynchronismBound {
        AsynchronismBound {
            b1: (num_states * num_actions) as u64,
            b2: self.num_threads as u64 + self.copy_period,
        }
    }

    /// The iteration budget, filled from the theorem when left at 0.
    pub fn resolved_iterations(
        &self,
        num_states: usize,
        num_actions: usize,
    ) -> Result<u64, SolverError> {
        if self.iterations > 0 {
            return Ok(self.iterations);
        }
        Ok(iteration_bound(
            self.epsilon,
            self.gamma,
            self.default_bounds(num_states, num_actions),
        )?)
    }

    /// The sample schedule with a theorem `K` substituted for the given `L`.
    pub fn resolved_samples(&self, iterations: u64) -> Result<SampleSchedule, SolverError> {
        match self.samples {
            SampleSchedule::Theorem | SampleSchedule::Constant(0) => Ok(SampleSchedule::Constant(
                sample_bound(self.epsilon, self.gamma, self.delta, iterations)?,
            )),
            s => Ok(s),
        }
    }
}

/// Solver state at a quiescent point.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub iterations: u64,
    /// Solver time so far, excluding pauses.
    pub wall_time: Duration,
    pub samples_drawn: u64,
    pub values: ValueVector,
    pub policy: Policy,
    /// Present for the exact-expectation and Q-learning solvers.
    pub q: Option<QTable>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub policy: Policy,
    pub values: ValueVector,
    pub q: Option<QTable>,
    pub stats: AsyncRunStats,
}
