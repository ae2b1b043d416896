//! Exact single-threaded reference solutions.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mdp::{
    check_policy, greedy_from_q, policy_operator_apply, sup_distance, validate_mdp, ActionId,
    MdpError, Policy, QTable, StateId, TabularMdp, ValueVector,
};

/// Policy evaluation switches from a dense LU solve to fixed-point iteration
/// above this many states.
pub const DENSE_SOLVE_MAX_STATES: usize = 2_000;

/// Stopping tolerance of the iterative policy evaluation fallback.
const ITERATIVE_EVAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] MdpError),
    #[error("tolerance {0} must be positive and finite")]
    Tolerance(f64),
    #[error("value iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("policy evaluation system is singular")]
    Singular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub q_star: QTable,
    pub v_star: ValueVector,
    pub pi_star: Policy,
    /// `‖T q_star − q_star‖∞`.
    pub residual: f64,
    pub iterations: usize,
}

/// Q-value iteration from zero until successive iterates differ by at most
/// `tol (1 − γ) / (2γ)`, which puts the result within `tol` of `Q*`.
pub fn value_iteration_exact(mdp: &TabularMdp, tol: f64) -> Result<OracleSolution, OracleError> {
    validate_mdp(mdp)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OracleError::Tolerance(tol));
    }
    let gamma = mdp.gamma();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let stop = tol * (1.0 - gamma) / (2.0 * gamma);
    let guard = {
        let n = ((1.0 / (tol * (1.0 - gamma))).ln() / (1.0 - gamma)).ceil();
        10 * (n.max(1.0) as usize)
    };

    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut iterations = 0;
    loop {
        if iterations >= guard {
            return Err(OracleError::NoConvergence { iterations });
        }
        iterations += 1;
        for i in 0..ns {
            for a in 0..na {
                next[i * na + a] = mdp.backup(StateId(i), ActionId(a), &v);
            }
        }
        let diff = sup_distance(&q, &next);
        std::mem::swap(&mut q, &mut next);
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = q[i * na..(i + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if diff <= stop {
            break;
        }
    }

    let mut residual: f64 = 0.0;
    for i in 0..ns {
        for a in 0..na {
            let t = mdp.backup(StateId(i), ActionId(a), &v);
            residual = residual.max((t - q[i * na + a]).abs());
        }
    }
    let q_star = QTable::from_vec(ns, na, q)?;
    let (v_star, pi_star) = greedy_from_q(&q_star);
    Ok(OracleSolution {
        q_star,
        v_star,
        pi_star,
        residual,
        iterations,
    })
}

/// `v^π`, the solution of `(I − γ P_π) v = r̄_π`.
pub fn policy_value_exact(mdp: &TabularMdp, policy: &Policy) -> Result<ValueVector, OracleError> {
    validate_mdp(mdp)?;
    check_policy(policy, mdp)?;
    if mdp.num_states() <= DENSE_SOLVE_MAX_STATES {
        dense_policy_value(mdp, policy)
    } else {
        iterative_policy_value(mdp, policy)
    }
}

fn dense_policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<ValueVector, OracleError> {
    let n = mdp.num_states();
    let gamma = mdp.gamma();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        let a = policy.action(StateId(i));
        for e in mdp.row(StateId(i), a) {
            m[(i, e.next.0)] -= gamma * e.prob;
            rhs[i] += e.prob * e.reward;
        }
    }
    let lu = m.clone().lu();
    let mut v = lu.solve(&rhs).ok_or(OracleError::Singular)?;
    // One round of iterative refinement.
    let r = &rhs - &m * &v;
    if let Some(dv) = lu.solve(&r) {
        v += dv;
    }
    let residual = (&rhs - &m * &v).amax();
    if !residual.is_finite() || residual > 1e-9 * n as f64 {
        return Err(OracleError::Singular);
    }
    Ok(ValueVector(v.iter().copied().collect()))
}

fn iterative_policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<ValueVector, OracleError> {
    let gamma = mdp.gamma();
    let stop = ITERATIVE_EVAL_TOL * (1.0 - gamma) / gamma;
    let mut v = ValueVector::zeros(mdp.num_states());
    loop {
        let next = policy_operator_apply(&v, policy, mdp)?;
        let diff = next.sup_distance(&v);
        v = next;
        if diff <= stop {
            return Ok(v);
        }
    }
}

/// `‖v* − v^π‖∞`, with `v*` computed to accuracy `tol`.
pub fn epsilon_optimality_gap(
    mdp: &TabularMdp,
    policy: &Policy,
    tol: f64,
) -> Result<f64, OracleError> {
    let sol = value_iteration_exact(mdp, tol)?;
    optimality_gap_against(mdp, &sol.v_star, policy)
}

/// `‖v_star − v^π‖∞` for a precomputed optimal value vector.
pub fn optimality_gap_against(
    mdp: &TabularMdp,
    v_star: &ValueVector,
    policy: &Policy,
) -> Result<f64, OracleError> {
    let v_pi = policy_value_exact(mdp, policy)?;
    Ok(v_star.sup_distance(&v_pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{bellman_apply, random_mdp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn self_loop() -> TabularMdp {
        TabularMdp::from_rows(1, 1, 0.9, vec![vec![(0, 1.0, 1.0)]]).unwrap()
    }

    /// State 0 moves to the absorbing rewarding state 1 under action 0 and
    /// loops on itself with no reward under action 1.
    fn chain() -> TabularMdp {
        TabularMdp::from_rows(
            2,
            2,
            0.5,
            vec![
                vec![(1, 1.0, 0.0)],
                vec![(0, 1.0, 0.0)],
                vec![(1, 1.0, 1.0)],
                vec![(1, 1.0, 1.0)],
            ],
        )
        .unwrap()
    }

    fn random_policy(mdp: &TabularMdp, rng: &mut ChaCha8Rng) -> Policy {
        Policy(
            (0..mdp.num_states())
                .map(|_| ActionId(rng.gen_range(0..mdp.num_actions())))
                .collect(),
        )
    }

    #[test]
    fn self_loop_values() {
        let sol = value_iteration_exact(&self_loop(), 1e-10).unwrap();
        assert!((sol.v_star.0[0] - 10.0).abs() <= 1e-10);
        let v = policy_value_exact(&self_loop(), &Policy(vec![ActionId(0)])).unwrap();
        assert!((v.0[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn chain_values_and_gap() {
        let mdp = chain();
        let sol = value_iteration_exact(&mdp, 1e-10).unwrap();
        assert!(sol.v_star.sup_distance(&ValueVector(vec![1.0, 2.0])) <= 1e-10);
        assert_eq!(sol.pi_star.0[0], ActionId(0));
        let v = policy_value_exact(&mdp, &sol.pi_star).unwrap();
        assert!(v.sup_distance(&ValueVector(vec![1.0, 2.0])) < 1e-12);
        let stay = Policy(vec![ActionId(1), ActionId(0)]);
        let gap = epsilon_optimality_gap(&mdp, &stay, 1e-10).unwrap();
        assert!((gap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_meets_stopping_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for tol in [1e-2, 1e-6, 1e-9] {
            let mdp = random_mdp(10, 3, 0.4, 0.9, &mut rng);
            let sol = value_iteration_exact(&mdp, tol).unwrap();
            let tq = bellman_apply(&sol.q_star, &mdp).unwrap();
            let r = tq.sup_distance(&sol.q_star);
            assert!(r <= tol * (1.0 - mdp.gamma()), "{r} vs {tol}");
            assert!((r - sol.residual).abs() < 1e-15);
        }
    }

    #[test]
    fn tighter_tolerance_moves_solution_by_at_most_tol() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mdp = random_mdp(12, 3, 0.3, rng.gen_range(0.5..0.95), &mut rng);
            let tol = 1e-3;
            let a = value_iteration_exact(&mdp, tol).unwrap();
            let b = value_iteration_exact(&mdp, tol / 10.0).unwrap();
            assert!(a.q_star.sup_distance(&b.q_star) <= tol);
        }
    }

    #[test]
    fn oracle_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mdp = random_mdp(15, 4, 0.5, 0.8, &mut rng);
        let a = value_iteration_exact(&mdp, 1e-8).unwrap();
        let b = value_iteration_exact(&mdp, 1e-8).unwrap();
        assert_eq!(a, b);
        let p = random_policy(&mdp, &mut rng);
        assert_eq!(
            policy_value_exact(&mdp, &p).unwrap(),
            policy_value_exact(&mdp, &p).unwrap()
        );
    }

    #[test]
    fn policy_values_are_fixed_points_and_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let mdp = random_mdp(8, 3, 0.5, rng.gen_range(0.5..0.95), &mut rng);
            let sol = value_iteration_exact(&mdp, 1e-10).unwrap();
            let p = random_policy(&mdp, &mut rng);
            let v = policy_value_exact(&mdp, &p).unwrap();
            let tv = policy_operator_apply(&v, &p, &mdp).unwrap();
            assert!(tv.sup_distance(&v) <= 1e-8);
            for (vp, vs) in v.0.iter().zip(&sol.v_star.0) {
                assert!(*vp <= vs + 1e-8);
            }
        }
    }

    #[test]
    fn gaps_are_nonnegative_and_small_for_optimal_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mdp = random_mdp(10, 3, 0.4, 0.9, &mut rng);
        let tol = 1e-6;
        let sol = value_iteration_exact(&mdp, tol).unwrap();
        assert!(optimality_gap_against(&mdp, &sol.v_star, &sol.pi_star).unwrap() <= 2.0 * tol);
        for _ in 0..100 {
            let p = random_policy(&mdp, &mut rng);
            assert!(optimality_gap_against(&mdp, &sol.v_star, &p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn iterative_and_dense_evaluation_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mdp = random_mdp(30, 2, 0.2, 0.9, &mut rng);
        let p = random_policy(&mdp, &mut rng);
        let dense = dense_policy_value(&mdp, &p).unwrap();
        let iter = iterative_policy_value(&mdp, &p).unwrap();
        assert!(dense.sup_distance(&iter) <= 1e-8);
    }

    /// If `v' ≤ v ≤ T_π v'` then `v ≤ v^π`.
    #[test]
    fn sandwich_premise_implies_policy_value_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut checked = 0;
        for _ in 0..200 {
            let mdp = random_mdp(6, 3, 0.5, rng.gen_range(0.5..0.95), &mut rng);
            let p = random_policy(&mdp, &mut rng);
            let v_pi = policy_value_exact(&mdp, &p).unwrap();
            let s = rng.gen_range(0.0..1.0);
            let v = ValueVector(v_pi.0.iter().map(|x| x * s).collect());
            let c = rng.gen_range(0.0..0.1);
            let v_lo = ValueVector(v.0.iter().map(|x| x - c).collect());
            let t = policy_operator_apply(&v_lo, &p, &mdp).unwrap();
            if v.0.iter().zip(&t.0).all(|(a, b)| a <= b) {
                checked += 1;
                for (a, b) in v.0.iter().zip(&v_pi.0) {
                    assert!(*a <= b + 1e-9);
                }
            }
        }
        assert!(checked > 10, "premise held only {checked} times");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert_eq!(
            value_iteration_exact(&self_loop(), 0.0).unwrap_err(),
            OracleError::Tolerance(0.0)
        );
        assert!(matches!(
            policy_value_exact(&self_loop(), &Policy(vec![ActionId(3)])),
            Err(OracleError::Model(MdpError::PolicyAction { .. }))
        ));
    }
}
