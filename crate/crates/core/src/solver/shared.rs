use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;

use crate::mdp::{argmax, ActionId, Policy, QTable, StateId, ValueVector};

#[derive(Debug)]
struct Slot {
    action: ActionId,
    /// Number of writes to this state so far.
    seq: u64,
    /// Q row, kept only by the solvers that need one.
    q: Vec<f64>,
}

/// Values, greedy actions and the iteration counter shared by all workers.
///
/// Values are individually atomic and may be read without locking. The
/// `(value, action)` pair of a state is only written under that state's lock.
#[derive(Debug)]
pub struct SharedTable {
    values: Vec<AtomicU64>,
    slots: Vec<Mutex<Slot>>,
    counter: AtomicU64,
    num_actions: usize,
    keeps_q: bool,
}

/// Result of a commit attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Commit {
    pub accepted: bool,
    /// Value of the state after the attempt.
    pub value: f64,
    /// Write sequence number of the state after the attempt.
    pub seq: u64,
}

impl SharedTable {
    /// All values zero and all actions 0. With `keep_q` a zero Q row is
    /// stored next to each state.
    pub fn new(num_states: usize, num_actions: usize, keep_q: bool) -> Self {
        let row = if keep_q { num_actions } else { 0 };
        Self {
            values: (0..num_states).map(|_| AtomicU64::new(0f64.to_bits())).collect(),
            slots: (0..num_states)
                .map(|_| {
                    Mutex::new(Slot {
                        action: ActionId(0),
                        seq: 0,
                        q: vec![0.0; row],
                    })
                })
                .collect(),
            counter: AtomicU64::new(0),
            num_actions,
            keeps_q: keep_q,
        }
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn value(&self, state: StateId) -> f64 {
        f64::from_bits(self.values[state.0].load(Ordering::Acquire))
    }

    #[inline]
    fn store(&self, state: StateId, v: f64) {
        self.values[state.0].store(v.to_bits(), Ordering::Release);
    }

    /// `(value, action, write sequence number)` of a state, read under its
    /// lock.
    pub fn read_pair(&self, state: StateId) -> (f64, ActionId, u64) {
        let slot = self.slots[state.0].lock();
        (self.value(state), slot.action, slot.seq)
    }

    /// Completed iterations.
    #[inline]
    pub fn counter(&self) -> u64 {
        self.counter.load(Ordering::Acquire)
    }

    /// Marks one iteration complete and returns the new count.
    #[inline]
    pub fn increment(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::AcqRel) + 1
    }

    pub fn values(&self) -> ValueVector {
        ValueVector((0..self.num_states()).map(|i| self.value(StateId(i))).collect())
    }

    pub fn policy(&self) -> Policy {
        Policy(self.slots.iter().map(|s| s.lock().action).collect())
    }

    pub fn q_table(&self) -> Option<QTable> {
        if !self.keeps_q {
            return None;
        }
        let mut q = Vec::with_capacity(self.num_states() * self.num_actions);
        for s in &self.slots {
            q.extend_from_slice(&s.lock().q);
        }
        QTable::from_vec(self.num_states(), self.num_actions, q).ok()
    }

    /// Raises `Q[i, a]` to `q` if that is larger and commits `q` to the
    /// state if it beats the current value.
    pub(crate) fn commit_monotone_q(&self, state: StateId, action: ActionId, q: f64) -> Commit {
        let mut slot = self.slots[state.0].lock();
        if q > slot.q[action.0] {
            slot.q[action.0] = q;
        }
        let current = self.value(state);
        if q > current {
            self.store(state, q);
            slot.action = action;
            slot.seq += 1;
            Commit {
                accepted: true,
                value: q,
                seq: slot.seq,
            }
        } else {
            Commit {
                accepted: false,
                value: current,
                seq: slot.seq,
            }
        }
    }

    /// `Q[i, a] ← (1 − α) Q[i, a] + α target`, then the state's value and
    /// action become the row maximum and its first maximizer.
    pub(crate) fn commit_relaxed_q(
        &self,
        state: StateId,
        action: ActionId,
        target: f64,
        alpha: f64,
    ) -> Commit {
        let mut slot = self.slots[state.0].lock();
        let old = slot.q[action.0];
        slot.q[action.0] = (1.0 - alpha) * old + alpha * target;
        let (best, v) = argmax(&slot.q);
        self.store(state, v);
        slot.action = ActionId(best);
        slot.seq += 1;
        Commit {
            accepted: true,
            value: v,
            seq: slot.seq,
        }
    }
}

/// A worker's private copy of the shared values.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSnapshot {
    pub v_hat: Vec<f64>,
    /// Counter value when the copy started.
    pub taken_at: u64,
}

impl LocalSnapshot {
    pub fn empty(num_states: usize) -> Self {
        Self {
            v_hat: vec![0.0; num_states],
            taken_at: 0,
        }
    }

    /// Copies every value entry by entry. Entries may come from different
    /// moments, each one a value that was committed at some point.
    pub fn refresh(&mut self, shared: &SharedTable) {
        self.taken_at = shared.counter();
        for (dst, src) in self.v_hat.iter_mut().zip(&shared.values) {
            *dst = f64::from_bits(src.load(Ordering::Acquire));
        }
    }
}

pub fn snapshot_values(shared: &SharedTable) -> LocalSnapshot {
    let mut s = LocalSnapshot::empty(shared.num_states());
    s.refresh(shared);
    s
}

/// Writes `(q, action)` to the state if `q` is strictly larger than its
/// current value. The comparison is repeated under the lock, so a racing
/// smaller `q` can never overwrite a larger committed one.
pub fn conditional_commit(shared: &SharedTable, state: StateId, action: ActionId, q: f64) -> Commit {
    let current = shared.value(state);
    if q <= current {
        return Commit {
            accepted: false,
            value: current,
            seq: 0,
        };
    }
    let mut slot = shared.slots[state.0].lock();
    let current = shared.value(state);
    if q > current {
        shared.store(state, q);
        slot.action = action;
        slot.seq += 1;
        Commit {
            accepted: true,
            value: q,
            seq: slot.seq,
        }
    } else {
        Commit {
            accepted: false,
            value: current,
            seq: slot.seq,
        }
    }
}
