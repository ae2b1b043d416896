//! Asynchronous-parallel Q-value iteration for discounted MDPs accessed
//! through a generative model.
//!
//! * [`mdp`]: tabular models, the sampling contract and the exact operators.
//! * [`sailing`]: the sailing gridworld, as a sampler and as a table.
//! * [`oracle`]: exact value iteration and policy evaluation.
//! * [`solver`]: the shared-memory AsyncQVI solver and async Q-learning.
//! * [`theory`]: iteration and sample budgets, contraction rates.
//! * [`eval`]: rollout evaluation and thread-scaling measurements.

pub mod eval;
pub mod mdp;
pub mod oracle;
pub mod sailing;
pub mod solver;
pub mod theory;

pub use mdp::{
    bellman_apply, greedy_from_q, policy_operator_apply, validate_mdp, ActionId, GenerativeModel,
    MdpError, Policy, QTable, StateId, TabularMdp, Transition, ValueVector,
};
pub use oracle::{epsilon_optimality_gap, policy_value_exact, value_iteration_exact, OracleSolution};
pub use sailing::{Sailing, SailingConfig, SailingState};
pub use solver::{
    aql_run, asyncqvi_run, asyncqvi_run_exact, AsyncRunStats, Selector, SampleSchedule,
    SolverConfig, StepSchedule,
};
pub use theory::AsynchronismBound;
