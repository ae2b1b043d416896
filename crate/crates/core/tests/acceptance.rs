//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.
//!
//! Run a subset with `ACCEPTANCE_ONLY=1,7 cargo test --test acceptance`.

use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use asyncq_core::eval::{evaluate_policy, speedup_benchmark, speedups, EvalConfig, EvaluationReport};
use asyncq_core::mdp::{random_mdp, Transition};
use asyncq_core::oracle::{optimality_gap_against, value_iteration_exact};
use asyncq_core::sailing::{sailing_tabularize, Sailing, SailingConfig};
use asyncq_core::solver::{
    aql_run, asyncqvi_run, asyncqvi_run_exact, asyncqvi_run_exact_with, SampleSchedule, Selector,
    SolverConfig, StepSchedule,
};
use asyncq_core::theory::{
    contraction_rate, hoeffding_trial_check, iteration_bound, sample_bound, AsynchronismBound,
};
use asyncq_core::{
    policy_operator_apply, ActionId, GenerativeModel, Policy, StateId, TabularMdp, ValueVector,
};

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Random model with `2..=max_s` states, `1..=max_a` actions and a discount
/// in `[lo, hi]`.
fn random_instance(rng: &mut ChaCha8Rng, max_s: usize, max_a: usize, lo: f64, hi: f64) -> TabularMdp {
    let s = rng.gen_range(2..=max_s);
    let a = rng.gen_range(1..=max_a);
    let density = rng.gen_range(0.1..=1.0);
    let gamma = rng.gen_range(lo..=hi);
    random_mdp(s, a, density, gamma, rng)
}

/// Exact mode, one thread, cyclic sweep: with B1 = |S||A| and B2 = 1 the
/// theorem budget drives every instance within ε of the optimum.
fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let eps = 0.1;
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    let mut bounds_match = true;
    for _ in 0..50 {
        let mdp = random_instance(&mut rng, 20, 4, 0.5, 0.9);
        let pairs = (mdp.num_states() * mdp.num_actions()) as u64;
        let l = iteration_bound(eps, mdp.gamma(), AsynchronismBound { b1: pairs, b2: 1 }).unwrap();
        let cfg = SolverConfig {
            epsilon: eps,
            iterations: l,
            selector: Selector::Cyclic,
            ..SolverConfig::default()
        };
        let out = asyncqvi_run_exact(&mdp, &cfg).unwrap();
        let measured = out.stats.observed_bounds();
        bounds_match &= measured == AsynchronismBound { b1: pairs, b2: 1 }
            && iteration_bound(eps, mdp.gamma(), measured).unwrap() == l;
        let star = value_iteration_exact(&mdp, 1e-8).unwrap();
        let err = out.values.sup_distance(&star.v_star);
        worst = worst.max(err);
        ok += (err <= eps) as usize;
    }
    let elapsed = started.elapsed();
    outcome(
        ok == 50 && bounds_match && elapsed < Duration::from_secs(30),
        format!(
            "{ok}/50 within eps, worst {worst:.3e}, measured bounds consistent: {bounds_match}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn epsilon_optimal_policy() -> Outcome {
    let started = Instant::now();
    let mdp = random_mdp(10, 3, 0.5, 0.9, &mut ChaCha8Rng::seed_from_u64(0xC2));
    let star = value_iteration_exact(&mdp, 1e-10).unwrap();
    let base = SolverConfig {
        epsilon: 0.2,
        delta: 0.1,
        gamma: 0.9,
        selector: Selector::Cyclic,
        ..SolverConfig::default()
    };
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    let mut budgets = (0, 0);
    for trial in 0..20 {
        let cfg = SolverConfig {
            seed: 1000 + trial,
            ..base.clone()
        };
        let out = asyncqvi_run(&mdp, &cfg).unwrap();
        budgets = (out.stats.iterations_done, out.stats.samples_per_update.unwrap_or(0));
        let gap = optimality_gap_against(&mdp, &star.v_star, &out.policy).unwrap();
        worst = worst.max(gap);
        ok += (gap <= 0.2) as usize;
    }
    let elapsed = started.elapsed();
    outcome(
        ok >= 18 && elapsed < Duration::from_secs(600),
        format!(
            "{ok}/20 trials with gap <= 0.2 (worst {worst:.3e}), L = {}, K = {}, {:.1}s",
            budgets.0,
            budgets.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn sailing_20() -> SailingConfig {
    SailingConfig::new(20)
}

fn monotone_and_bounded() -> Outcome {
    let gm = Sailing::new(sailing_20()).unwrap();
    let gamma = 0.95;
    let cfg = SolverConfig {
        epsilon: 0.5,
        gamma,
        num_threads: 8,
        iterations: 1_000_000,
        samples: SampleSchedule::Constant(5),
        copy_period: 8,
        record_commits: true,
        seed: 3,
        ..SolverConfig::default()
    };
    let out = asyncqvi_run(&gm, &cfg).unwrap();
    let cap = 1.0 / (1.0 - gamma);
    let n = gm.num_states();
    let mut accepted: Vec<_> = out.stats.commits.iter().filter(|c| c.accepted).collect();
    accepted.sort_by_key(|c| (c.state, c.seq));
    let mut last = vec![(0u64, 0.0f64); n];
    let mut violations = 0usize;
    for c in &accepted {
        let (seq, v) = last[c.state.0];
        if c.seq != seq + 1 || c.value_after <= v || !(0.0..=cap).contains(&c.value_after) {
            violations += 1;
        }
        last[c.state.0] = (c.seq, c.value_after);
    }
    for (i, (_, v)) in last.iter().enumerate() {
        if out.values.0[i] != *v {
            violations += 1;
        }
    }
    violations += out.values.0.iter().filter(|v| !(0.0..=cap).contains(*v)).count();
    let complete = out.stats.commits.len() as u64 == out.stats.iterations_done
        && out.stats.iterations_done == 1_000_000;
    outcome(
        violations == 0 && complete,
        format!(
            "{} commits replayed ({} accepted), {violations} violations",
            out.stats.commits.len(),
            accepted.len()
        ),
    )
}

fn sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut checks = 0u64;
    let mut violations = 0u64;
    for k in 0..10 {
        let mdp = random_instance(&mut rng, 12, 4, 0.5, 0.9);
        let cfg = SolverConfig {
            epsilon: 0.1,
            selector: if k % 2 == 0 { Selector::Uniform } else { Selector::Cyclic },
            checkpoint_every: 1,
            seed: k,
            ..SolverConfig::default()
        };
        let mut prev = ValueVector::zeros(mdp.num_states());
        asyncqvi_run_exact_with(&mdp, &cfg, &mut |c| {
            let upper = policy_operator_apply(&prev, &c.policy, &mdp).unwrap();
            for i in 0..mdp.num_states() {
                checks += 1;
                let (lo, mid, hi) = (prev.0[i], c.values.0[i], upper.0[i]);
                if !(lo <= mid && mid <= hi + 1e-12) {
                    violations += 1;
                }
            }
            prev = c.values.clone();
        })
        .unwrap();
    }
    outcome(
        violations == 0 && checks > 0,
        format!("{checks} componentwise checks, {violations} violations"),
    )
}

/// Sampling through plain categorical draws only.
struct Plain<'a>(&'a TabularMdp);

impl GenerativeModel for Plain<'_> {
    fn num_states(&self) -> usize {
        self.0.num_states()
    }
    fn num_actions(&self) -> usize {
        self.0.num_actions()
    }
    fn sample<R: Rng + ?Sized>(&self, s: StateId, a: ActionId, rng: &mut R) -> Transition {
        self.0.sample(s, a, rng)
    }
}

fn concentration() -> Outcome {
    // Three outcomes with distinct rewards and next-state values.
    let dist = TabularMdp::from_rows(
        3,
        1,
        0.9,
        vec![
            vec![(0, 0.5, 0.1), (1, 0.3, 0.9), (2, 0.2, 0.4)],
            vec![(1, 1.0, 0.0)],
            vec![(2, 1.0, 0.0)],
        ],
    )
    .unwrap();
    let pairs = [(StateId(0), ActionId(0))];
    let trials = 5000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut details = Vec::new();
    let mut pass = true;
    for &(gamma, eps, delta, l, plain) in &[
        (0.9, 0.2, 0.1, 1488u64, false),
        (0.5, 1.0, 0.5, 1u64, true),
        (0.5, 0.4, 0.2, 50u64, true),
    ] {
        let cap = 1.0 / (1.0 - gamma);
        let v_hat = ValueVector(vec![0.3 * cap, 0.9 * cap, 0.0]);
        let k = sample_bound(eps, gamma, delta, l).unwrap();
        let rate = if plain {
            hoeffding_trial_check(&Plain(&dist), &dist, &v_hat, &pairs, k, eps, gamma, trials, &mut rng)
        } else {
            hoeffding_trial_check(&dist, &dist, &v_hat, &pairs, k, eps, gamma, trials, &mut rng)
        };
        let p = delta / l as f64;
        let bound = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        pass &= rate <= bound;
        details.push(format!("K={k}: rate {rate:.4} <= {bound:.4}"));
    }
    outcome(pass, details.join("; "))
}

fn rate_envelope() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut tightest = f64::INFINITY;
    for k in 0..10 {
        let mdp = random_instance(&mut rng, 15, 3, 0.5, 0.9);
        let star = value_iteration_exact(&mdp, 1e-12).unwrap();
        let cfg = SolverConfig {
            epsilon: 0.01,
            selector: if k % 2 == 0 { Selector::Cyclic } else { Selector::Uniform },
            checkpoint_every: 1,
            seed: k,
            ..SolverConfig::default()
        };
        let mut trace = Vec::new();
        let out = asyncqvi_run_exact_with(&mdp, &cfg, &mut |c| {
            trace.push((c.iterations, c.values.sup_distance(&star.v_star)));
        })
        .unwrap();
        let bounds = out.stats.observed_bounds();
        let rho = contraction_rate(mdp.gamma(), bounds).unwrap();
        let e0 = star.v_star.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for &(t, err) in &trace {
            if t < bounds.b1 {
                continue;
            }
            let envelope = e0 * rho.powf(t as f64 - 2.0 * bounds.b1 as f64);
            checked += 1;
            tightest = tightest.min(envelope - err);
            if err > envelope + 1e-12 {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && checked > 0,
        format!("{checked} checkpoints, {violations} above the envelope, min slack {tightest:.3e}"),
    )
}

const REF_PREC: usize = 512;

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x, REF_PREC)
}

fn bu(x: u64) -> BigFloat {
    BigFloat::from_u64(x, REF_PREC)
}

/// `n − 1 < x ≤ n`.
fn is_ceiling(n: u64, x: &BigFloat) -> bool {
    n >= 1 && bu(n) >= *x && bu(n - 1) < *x
}

fn budget_calculators() -> Outcome {
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut mismatches = Vec::new();
    let ln = |x: &BigFloat, cc: &mut Consts| x.ln(REF_PREC, rm, cc);
    for draw in 0..100 {
        let gamma: f64 = rng.gen_range(0.01..0.999);
        let eps_max = (1.0 / (1.0 - gamma)).min(20.0);
        let eps: f64 = rng.gen_range(1e-3..eps_max * 0.999);
        let delta: f64 = rng.gen_range(1e-4..0.999);
        let b1: u64 = rng.gen_range(1..20_000);
        let b2: u64 = rng.gen_range(1..200);
        let bounds = AsynchronismBound { b1, b2 };

        let one_minus = bu(1).sub(&bf(gamma), REF_PREC, rm);
        let arg = bu(2).div(&one_minus.mul(&bf(eps), REF_PREC, rm), REF_PREC, rm);
        let l_ref = bu(2 * b1).add(
            &bu(b1 + b2 - 1)
                .div(&one_minus, REF_PREC, rm)
                .mul(&ln(&arg, &mut cc), REF_PREC, rm),
            REF_PREC,
            rm,
        );
        let l = iteration_bound(eps, gamma, bounds).unwrap();
        if !is_ceiling(l, &l_ref) {
            mismatches.push(format!("L draw {draw}"));
        }

        let sq = one_minus.mul(&one_minus, REF_PREC, rm);
        let e2 = bf(eps).mul(&bf(eps), REF_PREC, rm);
        let scale = bu(8).div(&sq.mul(&sq, REF_PREC, rm).mul(&e2, REF_PREC, rm), REF_PREC, rm);
        let log_arg = bu(4).mul(&bu(l), REF_PREC, rm).div(&bf(delta), REF_PREC, rm);
        let k_ref = scale.mul(&ln(&log_arg, &mut cc), REF_PREC, rm);
        let k = sample_bound(eps, gamma, delta, l).unwrap();
        if !is_ceiling(k, &k_ref) {
            mismatches.push(format!("K draw {draw}"));
        }

        let rho_ref = ln(&bf(gamma), &mut cc)
            .div(&bu(b1 + b2 - 1), REF_PREC, rm)
            .exp(REF_PREC, rm, &mut cc);
        let rho = contraction_rate(gamma, bounds).unwrap();
        let ulp = f64::EPSILON * rho;
        if !(bf(rho - ulp) < rho_ref && rho_ref < bf(rho + ulp)) {
            mismatches.push(format!("rho draw {draw}"));
        }
    }
    let examples = iteration_bound(1.0, 0.5, AsynchronismBound::SYNCHRONOUS).unwrap() == 5
        && sample_bound(1.0, 0.5, 0.5, 1).unwrap() == 267
        && (contraction_rate(0.81, AsynchronismBound { b1: 2, b2: 1 }).unwrap() - 0.9).abs() < 1e-15;
    outcome(
        mismatches.is_empty() && examples,
        format!(
            "100 draws x 3 calculators, {} mismatches {:?}, worked examples ok: {examples}",
            mismatches.len(),
            mismatches
        ),
    )
}

fn parallel_speedup() -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let gm = Sailing::new(sailing_20()).unwrap();
    let cfg = SolverConfig {
        epsilon: 0.5,
        gamma: 0.95,
        samples: SampleSchedule::Constant(5),
        copy_period: 100,
        seed: 8,
        ..SolverConfig::default()
    };
    let mut counts = vec![1, 2, 4, 8.min(cores)];
    counts.sort_unstable();
    counts.dedup();
    let rows = speedup_benchmark(&gm, &cfg, &counts, 2_000_000, 64).unwrap();
    let s = speedups(&rows);
    let mut pass = true;
    let mut parts = vec![format!("{cores} core(s)")];
    for (row, sp) in rows.iter().zip(&s) {
        if row.threads > 1 {
            pass &= *sp >= 0.6 * row.threads as f64;
        }
        parts.push(format!("T={}: {:.2}x ({:.2}s)", row.threads, sp, row.wall_time.as_secs_f64()));
    }
    outcome(pass, parts.join(", "))
}

/// 20×20 grid, `d = 0.05`, mild noise only.
fn easy_sailing() -> SailingConfig {
    SailingConfig {
        vortex_p: 0.0,
        ..sailing_20()
    }
}

const SAILING_GAMMA: f64 = 0.99;
const SAMPLE_BUDGET: u64 = 5_000_000;

/// Iterations whose adaptive sample counts add up to the budget.
fn adaptive_iterations(budget: u64) -> u64 {
    let mut total = 0;
    let mut t = 0;
    while total < budget {
        t += 1;
        total += SampleSchedule::ADAPTIVE.at(t).unwrap();
    }
    t
}

fn evaluate(gm: &Sailing, policy: &Policy) -> EvaluationReport {
    evaluate_policy(gm, policy, &EvalConfig::default(), &mut ChaCha8Rng::seed_from_u64(0xE7A1)).unwrap()
}

struct SailingRuns {
    oracle: EvaluationReport,
    asyncqvi: EvaluationReport,
    aqlc: (f64, EvaluationReport),
    aqld: EvaluationReport,
    oracle_secs: f64,
}

fn sailing_runs() -> SailingRuns {
    let cfg = easy_sailing();
    let gm = Sailing::new(cfg.clone()).unwrap();
    let started = Instant::now();
    let table = sailing_tabularize(&cfg, SAILING_GAMMA).unwrap();
    let star = value_iteration_exact(&table, 1e-3).unwrap();
    let oracle_secs = started.elapsed().as_secs_f64();
    let oracle = evaluate(&gm, &star.pi_star);

    let base = SolverConfig {
        epsilon: 1.0,
        gamma: SAILING_GAMMA,
        selector: Selector::Cyclic,
        seed: 9,
        ..SolverConfig::default()
    };
    let qvi_cfg = SolverConfig {
        iterations: adaptive_iterations(SAMPLE_BUDGET),
        samples: SampleSchedule::ADAPTIVE,
        ..base.clone()
    };
    let qvi = asyncqvi_run(&gm, &qvi_cfg).unwrap();
    let asyncqvi = evaluate(&gm, &qvi.policy);

    let ql_cfg = SolverConfig {
        iterations: SAMPLE_BUDGET,
        ..base
    };
    let mut aqlc: Option<(f64, EvaluationReport)> = None;
    for alpha in [0.05, 0.1, 0.2, 0.5, 0.8, 1.0] {
        let out = aql_run(&gm, &ql_cfg, StepSchedule::Constant(alpha)).unwrap();
        let rep = evaluate(&gm, &out.policy);
        if aqlc.as_ref().is_none_or(|(_, best)| rep.mean_return > best.mean_return) {
            aqlc = Some((alpha, rep));
        }
    }
    let aqld_out = aql_run(&gm, &ql_cfg, StepSchedule::DIMINISHING).unwrap();
    let aqld = evaluate(&gm, &aqld_out.policy);
    SailingRuns {
        oracle,
        asyncqvi,
        aqlc: aqlc.unwrap(),
        aqld,
        oracle_secs,
    }
}

fn sailing_reproduction(runs: &SailingRuns) -> Outcome {
    let (o, q) = (&runs.oracle, &runs.asyncqvi);
    let rel = (q.mean_return - o.mean_return).abs() / o.mean_return;
    outcome(
        q.flags >= 80 && rel <= 0.15,
        format!(
            "AsyncQVI flags {}/100, return {:.2} vs oracle {:.2} ({} flags), rel diff {:.1}%, oracle solve {:.1}s",
            q.flags,
            q.mean_return,
            o.mean_return,
            o.flags,
            100.0 * rel,
            runs.oracle_secs
        ),
    )
}

fn baseline_parity(runs: &SailingRuns) -> Outcome {
    let (alpha, c) = &runs.aqlc;
    let q = &runs.asyncqvi;
    let d = &runs.aqld;
    let rel = (c.mean_return - q.mean_return).abs() / q.mean_return;
    // "No better" with a one-sided allowance for evaluation noise.
    let noise = 2.0 * (c.std_error().powi(2) + d.std_error().powi(2)).sqrt();
    let ordered = d.mean_return <= c.mean_return + noise;
    outcome(
        rel <= 0.2 && ordered,
        format!(
            "AQLC(alpha={alpha}) {:.2} vs AsyncQVI {:.2} ({:.1}%), AQLD {:.2} <= AQLC + {:.2}: {ordered}",
            c.mean_return,
            q.mean_return,
            100.0 * rel,
            d.mean_return,
            noise
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    // Skip the libtest-style listing probes cargo may send.
    if std::env::args().any(|a| a == "--list") {
        return;
    }

    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        println!("criterion {n:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    };
    let simple: [Criterion; 8] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "epsilon-optimal policy", epsilon_optimal_policy),
        (3, "monotone and bounded values", monotone_and_bounded),
        (4, "sandwich invariant", sandwich),
        (5, "sample concentration", concentration),
        (6, "rate envelope", rate_envelope),
        (7, "budget calculators", budget_calculators),
        (8, "parallel speedup", parallel_speedup),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            report(n, name, f());
        }
    }
    if wanted(9) || wanted(10) {
        let runs = sailing_runs();
        if wanted(9) {
            report(9, "sailing reproduction", sailing_reproduction(&runs));
        }
        if wanted(10) {
            report(10, "baseline parity", baseline_parity(&runs));
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
