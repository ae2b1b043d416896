//! Worker pool shared by all solvers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::select::{CoordinateSelector, Selector};
use super::shared::{Commit, LocalSnapshot, SharedTable};
use super::stats::{AsyncRunStats, CommitRecord};
use super::{Checkpoint, RunOutput};
use crate::mdp::{ActionId, GenerativeModel, StateId};

pub(crate) struct Step {
    pub q: f64,
    pub commit: Commit,
    pub samples: u64,
}

/// The per-iteration computation and commit of a solver.
pub(crate) trait Kernel: Sync {
    fn update(
        &self,
        shared: &SharedTable,
        state: StateId,
        action: ActionId,
        snapshot: &LocalSnapshot,
        iteration: u64,
        rng: &mut ChaCha8Rng,
    ) -> Step;
}

pub(crate) struct Params {
    pub num_threads: usize,
    pub iterations: u64,
    pub selector: Selector,
    pub copy_period: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub record_commits: bool,
    pub keep_q: bool,
    pub samples_per_update: Option<u64>,
}

struct Worker {
    id: usize,
    rng: ChaCha8Rng,
    selector: CoordinateSelector,
    snapshot: LocalSnapshot,
    steps: u64,
    accepted: u64,
    rejected: u64,
    samples: u64,
    b1: u64,
    b2: u64,
    log: Vec<CommitRecord>,
}

impl Worker {
    fn samples_total(&self) -> u64 {
        self.samples + self.selector.samples_drawn()
    }
}

struct Tracking {
    next: AtomicU64,
    last_pair: Vec<AtomicU64>,
    last_state: Vec<AtomicU64>,
}

/// Claims the next iteration index below `end`.
#[inline]
fn claim(next: &AtomicU64, end: u64) -> Option<u64> {
    let mut cur = next.load(Ordering::Relaxed);
    loop {
        if cur >= end {
            return None;
        }
        match next.compare_exchange_weak(cur, cur + 1, Ordering::AcqRel, Ordering::Relaxed) {
            Ok(_) => return Some(cur),
            Err(seen) => cur = seen,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn work<G: GenerativeModel, K: Kernel>(
    w: &mut Worker,
    gm: &G,
    kernel: &K,
    shared: &SharedTable,
    track: &Tracking,
    end: u64,
    copy_period: u64,
    record: bool,
) {
    let num_actions = shared.num_actions();
    while let Some(t) = claim(&track.next, end) {
        let (i, a) = w.selector.next(gm, &mut w.rng);
        if w.steps.is_multiple_of(copy_period) {
            w.snapshot.refresh(shared);
        }
        w.steps += 1;
        let step = kernel.update(shared, i, a, &w.snapshot, t, &mut w.rng);
        let at_commit = shared.counter();
        w.b2 = w.b2.max(at_commit.saturating_sub(w.snapshot.taken_at) + 1);

        let it = t + 1;
        let prev = track.last_pair[i.0 * num_actions + a.0].fetch_max(it, Ordering::Relaxed);
        if it > prev {
            w.b1 = w.b1.max(it - prev);
        }
        track.last_state[i.0].fetch_max(it, Ordering::Relaxed);

        w.samples += step.samples;
        if step.commit.accepted {
            w.accepted += 1;
        } else {
            w.rejected += 1;
        }
        if record {
            w.log.push(CommitRecord {
                iteration: it,
                worker: w.id,
                state: i,
                action: a,
                q: step.q,
                accepted: step.commit.accepted,
                value_after: step.commit.value,
                seq: step.commit.seq,
                snapshot_at: w.snapshot.taken_at,
            });
        }
        shared.increment();
    }
}

pub(crate) fn run<G: GenerativeModel, K: Kernel>(
    gm: &G,
    kernel: &K,
    p: &Params,
    mut observer: Option<&mut dyn FnMut(&Checkpoint)>,
) -> RunOutput {
    let (ns, na) = (gm.num_states(), gm.num_actions());
    let shared = SharedTable::new(ns, na, p.keep_q);
    let track = Tracking {
        next: AtomicU64::new(0),
        last_pair: (0..ns * na).map(|_| AtomicU64::new(0)).collect(),
        last_state: (0..ns).map(|_| AtomicU64::new(0)).collect(),
    };
    let mut workers: Vec<Worker> = (0..p.num_threads)
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(id as u64);
            let selector = CoordinateSelector::new(p.selector, id, p.num_threads, ns, na, &mut rng);
            Worker {
                id,
                rng,
                selector,
                snapshot: LocalSnapshot::empty(ns),
                steps: 0,
                accepted: 0,
                rejected: 0,
                samples: 0,
                b1: 0,
                b2: 0,
                log: Vec::new(),
            }
        })
        .collect();

    let every = if p.checkpoint_every == 0 {
        p.iterations
    } else {
        p.checkpoint_every
    };
    let mut end = 0;
    let mut wall = Duration::ZERO;
    while end < p.iterations {
        end = end.saturating_add(every).min(p.iterations);
        let started = Instant::now();
        if let [w] = workers.as_mut_slice() {
            work(w, gm, kernel, &shared, &track, end, p.copy_period, p.record_commits);
        } else {
            std::thread::scope(|s| {
                for w in workers.iter_mut() {
                    let (shared, track) = (&shared, &track);
                    s.spawn(move || {
                        work(w, gm, kernel, shared, track, end, p.copy_period, p.record_commits)
                    });
                }
            });
        }
        wall += started.elapsed();
        if let Some(obs) = observer.as_mut() {
            obs(&Checkpoint {
                iterations: shared.counter(),
                wall_time: wall,
                samples_drawn: workers.iter().map(Worker::samples_total).sum(),
                values: shared.values(),
                policy: shared.policy(),
                q: shared.q_table(),
            });
        }
    }

    let done = shared.counter();
    let tail = track
        .last_pair
        .iter()
        .map(|l| done + 1 - l.load(Ordering::Relaxed).min(done))
        .max()
        .unwrap_or(0);
    let mut commits = Vec::new();
    if p.record_commits {
        for w in &mut workers {
            commits.append(&mut w.log);
        }
        commits.sort_by_key(|c: &CommitRecord| c.iteration);
    }
    let stats = AsyncRunStats {
        iterations_done: done,
        wall_time: wall,
        last_update: track.last_state.iter().map(|l| l.load(Ordering::Relaxed)).collect(),
        observed_b1: workers.iter().map(|w| w.b1).max().unwrap_or(0).max(tail),
        observed_b2: workers.iter().map(|w| w.b2).max().unwrap_or(0),
        updates_accepted: workers.iter().map(|w| w.accepted).sum(),
        updates_rejected: workers.iter().map(|w| w.rejected).sum(),
        samples_drawn: workers.iter().map(Worker::samples_total).sum(),
        num_threads: p.num_threads,
        samples_per_update: p.samples_per_update,
        commits,
    };
    RunOutput {
        policy: shared.policy(),
        values: shared.values(),
        q: shared.q_table(),
        stats,
    }
}

