//! Tabular discounted MDPs, the generative-model sampling contract, and the
//! exact Bellman and fixed-policy operators.

mod io;
mod random;

pub use io::{parse_mdp, ParseError, parse_policy, write_mdp, write_policy};
pub use random::random_mdp;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

/// Dense zero-based index of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Dense zero-based index of an action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("model must have at least one state and one action")]
    Empty,
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("state {state}, action {action}: next state {next} is out of range")]
    NextStateOutOfRange {
        state: usize,
        action: usize,
        next: usize,
    },
    #[error("state {state}, action {action}: next state {next} listed twice")]
    DuplicateEntry {
        state: usize,
        action: usize,
        next: usize,
    },
    #[error("state {state}, action {action}: index out of range")]
    PairOutOfRange { state: usize, action: usize },
    #[error("state {state}, action {action}: probability {p} for next state {next} is not a finite nonnegative number")]
    BadProbability {
        state: usize,
        action: usize,
        next: usize,
        p: f64,
    },
    #[error("state {state}, action {action}: probabilities sum to {sum}, expected 1")]
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("state {state}, action {action}: reward {reward} for next state {next} is outside [0, 1]")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        next: usize,
        reward: f64,
    },
    #[error("discount factor {0} is outside (0, 1)")]
    Gamma(f64),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("policy selects action {action} at state {state}, but the model has {num_actions} actions")]
    PolicyAction {
        state: usize,
        action: usize,
        num_actions: usize,
    },
}

/// Tolerance on the per-row probability sum.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// One sampled transition of a generative model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: StateId,
    pub reward: f64,
}

/// Sample means of `k` generative-model calls at one state-action pair:
/// the average reward and the average of `values` at the sampled next states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleMeans {
    pub reward: f64,
    pub value: f64,
}

/// Sampling access to an MDP: given `(i, a)`, draw an independent next state
/// `j ~ p_i^a` together with its reward `r_ij^a ∈ [0, 1]`.
pub trait GenerativeModel: Sync {
    fn num_states(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn sample<R: Rng + ?Sized>(&self, state: StateId, action: ActionId, rng: &mut R) -> Transition;

    /// Averages over `k` independent calls to [`GenerativeModel::sample`].
    ///
    /// Implementations may override this with any procedure producing the same
    /// joint distribution of `(mean reward, mean value)`.
    fn sample_means<R: Rng + ?Sized>(
        &self,
        state: StateId,
        action: ActionId,
        k: u64,
        values: &[f64],
        rng: &mut R,
    ) -> SampleMeans {
        let mut reward = 0.0;
        let mut value = 0.0;
        for _ in 0..k {
            let t = self.sample(state, action, rng);
            reward += t.reward;
            value += values[t.next.0];
        }
        let k = k.max(1) as f64;
        SampleMeans {
            reward: reward / k,
            value: value / k,
        }
    }

    /// Whether `state` is a goal state, used for evaluation flags.
    fn is_target(&self, _state: StateId) -> bool {
        false
    }
}

impl<G: GenerativeModel> GenerativeModel for &G {
    fn num_states(&self) -> usize {
        (**self).num_states()
    }
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn sample<R: Rng + ?Sized>(&self, state: StateId, action: ActionId, rng: &mut R) -> Transition {
        (**self).sample(state, action, rng)
    }
    fn sample_means<R: Rng + ?Sized>(
        &self,
        state: StateId,
        action: ActionId,
        k: u64,
        values: &[f64],
        rng: &mut R,
    ) -> SampleMeans {
        (**self).sample_means(state, action, k, values, rng)
    }
    fn is_target(&self, state: StateId) -> bool {
        (**self).is_target(state)
    }
}

/// Explicit `(S, A, P, r, γ)` with sparse rows stored in CSR layout.
///
/// Row `i * num_actions + a` holds the `(j, p_ij^a, r_ij^a)` entries with
/// `p_ij^a > 0`, sorted by `j`.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    row_start: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    reward: Vec<f64>,
    cumulative: Vec<f64>,
    targets: Vec<bool>,
}

/// One `(next state, probability, reward)` entry of a transition row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
}

impl TabularMdp {
    /// Builds a model from `(state, action, next, probability, reward)` tuples.
    ///
    /// Only structural problems (indices out of range, duplicates) are
    /// rejected here; numeric invariants are checked by [`validate_mdp`].
    /// Entries with probability exactly zero are dropped.
    pub fn from_entries<I>(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        entries: I,
    ) -> Result<Self, MdpError>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64, f64)>,
    {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::Empty);
        }
        let mut entries: Vec<_> = entries.into_iter().collect();
        for &(i, a, j, _, _) in &entries {
            if i >= num_states || a >= num_actions {
                return Err(MdpError::PairOutOfRange {
                    state: i,
                    action: a,
                });
            }
            if j >= num_states {
                return Err(MdpError::NextStateOutOfRange {
                    state: i,
                    action: a,
                    next: j,
                });
            }
        }
        entries.sort_by_key(|&(i, a, j, _, _)| (i, a, j));
        let mut builder = TabularMdpBuilder::new(num_states, num_actions, gamma);
        let mut row = Vec::new();
        let mut rest = entries.as_slice();
        for i in 0..num_states {
            for a in 0..num_actions {
                let n = rest.partition_point(|e| (e.0, e.1) == (i, a));
                row.clear();
                row.extend(rest[..n].iter().map(|&(_, _, j, p, r)| (j, p, r)));
                rest = &rest[n..];
                builder.push_row(&mut row)?;
            }
        }
        builder.finish()
    }

    /// Builds a model from per-row entry lists indexed by `i * num_actions + a`.
    pub fn from_rows(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        rows: Vec<Vec<(usize, f64, f64)>>,
    ) -> Result<Self, MdpError> {
        if rows.len() != num_states * num_actions {
            return Err(MdpError::RowCount {
                expected: num_states * num_actions,
                found: rows.len(),
            });
        }
        let entries = rows.into_iter().enumerate().flat_map(|(row, es)| {
            es.into_iter()
                .map(move |(j, p, r)| (row / num_actions, row % num_actions, j, p, r))
        });
        Self::from_entries(num_states, num_actions, gamma, entries)
    }

    fn from_csr(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        row_start: Vec<usize>,
        next: Vec<u32>,
        prob: Vec<f64>,
        reward: Vec<f64>,
    ) -> Self {
        let mut cumulative = Vec::with_capacity(prob.len());
        for w in row_start.windows(2) {
            let mut acc = 0.0;
            for &p in &prob[w[0]..w[1]] {
                acc += p;
                cumulative.push(acc);
            }
        }
        Self {
            num_states,
            num_actions,
            gamma,
            row_start,
            next,
            prob,
            reward,
            cumulative,
            targets: vec![false; num_states],
        }
    }

    /// Marks goal states so that evaluation flags are meaningful.
    pub fn with_targets(mut self, targets: impl IntoIterator<Item = StateId>) -> Self {
        for s in targets {
            if s.0 < self.num_states {
                self.targets[s.0] = true;
            }
        }
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Total number of stored nonzero transition entries.
    pub fn nnz(&self) -> usize {
        self.prob.len()
    }

    #[inline]
    fn range(&self, state: StateId, action: ActionId) -> std::ops::Range<usize> {
        let row = state.0 * self.num_actions + action.0;
        self.row_start[row]..self.row_start[row + 1]
    }

    /// Entries of the row for `(state, action)`.
    pub fn row(&self, state: StateId, action: ActionId) -> impl Iterator<Item = Entry> + '_ {
        self.range(state, action).map(move |k| Entry {
            next: StateId(self.next[k] as usize),
            prob: self.prob[k],
            reward: self.reward[k],
        })
    }

    /// Number of nonzero entries in the row for `(state, action)`.
    pub fn row_len(&self, state: StateId, action: ActionId) -> usize {
        self.range(state, action).len()
    }

    /// `r̄_i^a = Σ_j p_ij^a r_ij^a`.
    #[inline]
    pub fn expected_reward(&self, state: StateId, action: ActionId) -> f64 {
        let r = self.range(state, action);
        self.prob[r.clone()]
            .iter()
            .zip(&self.reward[r])
            .map(|(p, r)| p * r)
            .sum()
    }

    /// `p_i^a ⊤ values`.
    #[inline]
    pub fn expected_value(&self, state: StateId, action: ActionId, values: &[f64]) -> f64 {
        let r = self.range(state, action);
        self.prob[r.clone()]
            .iter()
            .zip(&self.next[r])
            .map(|(p, &j)| p * values[j as usize])
            .sum()
    }

    /// `r̄_i^a + γ p_i^a ⊤ values`.
    #[inline]
    pub fn backup(&self, state: StateId, action: ActionId, values: &[f64]) -> f64 {
        let r = self.range(state, action);
        let mut reward = 0.0;
        let mut future = 0.0;
        for k in r {
            let p = self.prob[k];
            reward += p * self.reward[k];
            future += p * values[self.next[k] as usize];
        }
        reward + self.gamma * future
    }
}

/// Streams rows into a [`TabularMdp`] in `(state, action)` order.
#[derive(Debug)]
pub struct TabularMdpBuilder {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    row_start: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    reward: Vec<f64>,
}

impl TabularMdpBuilder {
    pub fn new(num_states: usize, num_actions: usize, gamma: f64) -> Self {
        let mut row_start = Vec::with_capacity(num_states * num_actions + 1);
        row_start.push(0);
        Self {
            num_states,
            num_actions,
            gamma,
            row_start,
            next: Vec::new(),
            prob: Vec::new(),
            reward: Vec::new(),
        }
    }

    /// Appends the next row as `(next state, probability, reward)` entries.
    /// Entries are sorted in place; zero-probability entries are dropped.
    pub fn push_row(&mut self, entries: &mut [(usize, f64, f64)]) -> Result<(), MdpError> {
        let row = self.row_start.len() - 1;
        let (state, action) = (row / self.num_actions.max(1), row % self.num_actions.max(1));
        if row >= self.num_states * self.num_actions {
            return Err(MdpError::PairOutOfRange { state, action });
        }
        entries.sort_by_key(|e| e.0);
        for (k, &(j, p, r)) in entries.iter().enumerate() {
            if j >= self.num_states {
                return Err(MdpError::NextStateOutOfRange {
                    state,
                    action,
                    next: j,
                });
            }
            if k > 0 && entries[k - 1].0 == j {
                return Err(MdpError::DuplicateEntry {
                    state,
                    action,
                    next: j,
                });
            }
            if p != 0.0 {
                self.next.push(j as u32);
                self.prob.push(p);
                self.reward.push(r);
            }
        }
        self.row_start.push(self.next.len());
        Ok(())
    }

    pub fn finish(self) -> Result<TabularMdp, MdpError> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(MdpError::Empty);
        }
        let rows = self.num_states * self.num_actions;
        if self.row_start.len() != rows + 1 {
            return Err(MdpError::RowCount {
                expected: rows,
                found: self.row_start.len() - 1,
            });
        }
        Ok(TabularMdp::from_csr(
            self.num_states,
            self.num_actions,
            self.gamma,
            self.row_start,
            self.next,
            self.prob,
            self.reward,
        ))
    }
}

/// Draws `k` samples from the row through conditional binomials instead of
/// `k` categorical draws once `k` exceeds this many samples.
const MULTINOMIAL_MIN_SAMPLES: u64 = 32;

impl GenerativeModel for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn sample<R: Rng + ?Sized>(&self, state: StateId, action: ActionId, rng: &mut R) -> Transition {
        let r = self.range(state, action);
        let cum = &self.cumulative[r.clone()];
        let total = cum.last().copied().unwrap_or(0.0);
        let u = rng.gen::<f64>() * total;
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        Transition {
            next: StateId(self.next[r.start + k] as usize),
            reward: self.reward[r.start + k],
        }
    }

    /// For large `k` the count vector of `k` i.i.d. categorical draws is
    /// generated directly as a multinomial, which has the same distribution.
    fn sample_means<R: Rng + ?Sized>(
        &self,
        state: StateId,
        action: ActionId,
        k: u64,
        values: &[f64],
        rng: &mut R,
    ) -> SampleMeans {
        let r = self.range(state, action);
        if k < MULTINOMIAL_MIN_SAMPLES || r.len() <= 1 {
            let mut reward = 0.0;
            let mut value = 0.0;
            for _ in 0..k {
                let t = self.sample(state, action, rng);
                reward += t.reward;
                value += values[t.next.0];
            }
            let kf = k.max(1) as f64;
            return SampleMeans {
                reward: reward / kf,
                value: value / kf,
            };
        }
        let total: f64 = self.prob[r.clone()].iter().sum();
        let mut remaining_n = k;
        let mut remaining_p = total;
        let mut reward = 0.0;
        let mut value = 0.0;
        let last = r.end - 1;
        for idx in r {
            if remaining_n == 0 {
                break;
            }
            let count = if idx == last {
                remaining_n
            } else {
                let p = (self.prob[idx] / remaining_p).clamp(0.0, 1.0);
                if p >= 1.0 {
                    remaining_n
                } else {
                    Binomial::new(remaining_n, p)
                        .expect("binomial parameters are in range")
                        .sample(rng)
                }
            };
            remaining_n -= count;
            remaining_p -= self.prob[idx];
            let c = count as f64;
            reward += c * self.reward[idx];
            value += c * values[self.next[idx] as usize];
        }
        let kf = k as f64;
        SampleMeans {
            reward: reward / kf,
            value: value / kf,
        }
    }

    fn is_target(&self, state: StateId) -> bool {
        self.targets[state.0]
    }
}

/// Checks the numeric invariants of a tabular model: each row is a
/// probability vector (within [`ROW_SUM_TOLERANCE`]), rewards lie in `[0, 1]`,
/// and `γ ∈ (0, 1)`.
pub fn validate_mdp(mdp: &TabularMdp) -> Result<(), MdpError> {
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        return Err(MdpError::Gamma(mdp.gamma));
    }
    for i in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let (s, act) = (StateId(i), ActionId(a));
            let mut sum = 0.0;
            for e in mdp.row(s, act) {
                if !(e.prob.is_finite() && e.prob >= 0.0) {
                    return Err(MdpError::BadProbability {
                        state: i,
                        action: a,
                        next: e.next.0,
                        p: e.prob,
                    });
                }
                if !(0.0..=1.0).contains(&e.reward) {
                    return Err(MdpError::RewardOutOfRange {
                        state: i,
                        action: a,
                        next: e.next.0,
                        reward: e.reward,
                    });
                }
                sum += e.prob;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MdpError::RowSum {
                    state: i,
                    action: a,
                    sum,
                });
            }
        }
    }
    Ok(())
}

/// Action values stored row-major by state: entry `(i, a)` lives at
/// `i * num_actions + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    pub fn from_vec(
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if values.len() != num_states * num_actions {
            return Err(MdpError::Shape {
                expected: format!("{} entries", num_states * num_actions),
                found: format!("{} entries", values.len()),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, state: StateId, action: ActionId) -> f64 {
        self.values[state.0 * self.num_actions + action.0]
    }

    #[inline]
    pub fn set(&mut self, state: StateId, action: ActionId, value: f64) {
        self.values[state.0 * self.num_actions + action.0] = value;
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        let start = state.0 * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

/// Per-state values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(num_states: usize) -> Self {
        Self(vec![0.0; num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_distance(&self, other: &ValueVector) -> f64 {
        sup_distance(&self.0, &other.0)
    }
}

/// A deterministic stationary policy: one action per state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy(pub Vec<ActionId>);

impl Policy {
    pub fn constant(num_states: usize, action: ActionId) -> Self {
        Self(vec![action; num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn action(&self, state: StateId) -> ActionId {
        self.0[state.0]
    }
}

/// `max_k |a_k − b_k|`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `[TQ]_{i,a} = Σ_j p_ij^a r_ij^a + γ Σ_j p_ij^a max_a' Q_{j,a'}`.
pub fn bellman_apply(q: &QTable, mdp: &TabularMdp) -> Result<QTable, MdpError> {
    check_q_shape(q, mdp)?;
    let (values, _) = greedy_from_q(q);
    let mut out = QTable::zeros(mdp.num_states, mdp.num_actions);
    for i in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            out.set(
                StateId(i),
                ActionId(a),
                mdp.backup(StateId(i), ActionId(a), &values.0),
            );
        }
    }
    Ok(out)
}

/// `[T_π v]_i = r̄_i^{π_i} + γ p_i^{π_i} ⊤ v`.
pub fn policy_operator_apply(
    v: &ValueVector,
    policy: &Policy,
    mdp: &TabularMdp,
) -> Result<ValueVector, MdpError> {
    check_policy(policy, mdp)?;
    if v.len() != mdp.num_states {
        return Err(MdpError::Shape {
            expected: format!("{} values", mdp.num_states),
            found: format!("{} values", v.len()),
        });
    }
    Ok(ValueVector(
        (0..mdp.num_states)
            .map(|i| mdp.backup(StateId(i), policy.0[i], &v.0))
            .collect(),
    ))
}

/// Row-wise maximum and maximizer of a Q table. Ties go to the lowest action
/// index.
pub fn greedy_from_q(q: &QTable) -> (ValueVector, Policy) {
    let mut values = Vec::with_capacity(q.num_states);
    let mut actions = Vec::with_capacity(q.num_states);
    for i in 0..q.num_states {
        let (best, v) = argmax(q.row(StateId(i)));
        values.push(v);
        actions.push(ActionId(best));
    }
    (ValueVector(values), Policy(actions))
}

/// First index attaining the maximum of a nonempty row.
#[inline]
pub(crate) fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut v = row[0];
    for (k, &x) in row.iter().enumerate().skip(1) {
        if x > v {
            best = k;
            v = x;
        }
    }
    (best, v)
}

pub(crate) fn check_policy(policy: &Policy, mdp: &TabularMdp) -> Result<(), MdpError> {
    if policy.len() != mdp.num_states {
        return Err(MdpError::Shape {
            expected: format!("policy over {} states", mdp.num_states),
            found: format!("policy over {} states", policy.len()),
        });
    }
    if let Some((i, a)) = policy
        .0
        .iter()
        .enumerate()
        .find(|(_, a)| a.0 >= mdp.num_actions)
    {
        return Err(MdpError::PolicyAction {
            state: i,
            action: a.0,
            num_actions: mdp.num_actions,
        });
    }
    Ok(())
}

fn check_q_shape(q: &QTable, mdp: &TabularMdp) -> Result<(), MdpError> {
    if q.num_states != mdp.num_states || q.num_actions != mdp.num_actions {
        return Err(MdpError::Shape {
            expected: format!("{}x{}", mdp.num_states, mdp.num_actions),
            found: format!("{}x{}", q.num_states, q.num_actions),
        });
    }
    Ok(())
}
