use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asyncq_core::mdp::random_mdp;
use asyncq_core::sailing::{sailing_decode, sailing_encode};
use asyncq_core::{
    bellman_apply, policy_operator_apply, ActionId, Policy, QTable, SailingConfig, SailingState,
    StateId, TabularMdp, ValueVector,
};

fn instance(seed: u64, s: usize, a: usize, gamma: f64) -> TabularMdp {
    random_mdp(s, a, 0.5, gamma, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn table(s: usize, a: usize, xs: &[f64]) -> QTable {
    QTable::from_vec(s, a, xs.iter().cycle().take(s * a).copied().collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bellman_operator_contracts(
        seed in any::<u64>(),
        s in 1usize..12,
        a in 1usize..5,
        gamma in 0.0f64..0.999,
        x in prop::collection::vec(-50.0f64..50.0, 1..60),
        y in prop::collection::vec(-50.0f64..50.0, 1..60),
    ) {
        let mdp = instance(seed, s, a, gamma);
        let (q1, q2) = (table(s, a, &x), table(s, a, &y));
        let lhs = bellman_apply(&q1, &mdp).unwrap().sup_distance(&bellman_apply(&q2, &mdp).unwrap());
        prop_assert!(lhs <= gamma * q1.sup_distance(&q2) + 1e-9);
    }

    #[test]
    fn policy_operator_is_monotone_and_contracts(
        seed in any::<u64>(),
        s in 1usize..12,
        a in 1usize..5,
        gamma in 0.0f64..0.999,
        base in prop::collection::vec(-50.0f64..50.0, 12),
        bump in prop::collection::vec(0.0f64..10.0, 12),
        acts in prop::collection::vec(0usize..5, 12),
    ) {
        let mdp = instance(seed, s, a, gamma);
        let pi = Policy(acts[..s].iter().map(|&k| ActionId(k % a)).collect());
        let lo = ValueVector(base[..s].to_vec());
        let hi = ValueVector(lo.0.iter().zip(&bump).map(|(v, b)| v + b).collect());
        let t_lo = policy_operator_apply(&lo, &pi, &mdp).unwrap();
        let t_hi = policy_operator_apply(&hi, &pi, &mdp).unwrap();
        for i in 0..s {
            prop_assert!(t_lo.0[i] <= t_hi.0[i] + 1e-12);
        }
        prop_assert!(t_lo.sup_distance(&t_hi) <= gamma * lo.sup_distance(&hi) + 1e-9);
    }

    #[test]
    fn sailing_ids_round_trip(grid in 1usize..40, x in 0usize..40, y in 0usize..40, wind in 0usize..8) {
        let cfg = SailingConfig::new(grid);
        let state = SailingState { x: x % grid, y: y % grid, wind };
        let id = sailing_encode(state, &cfg).unwrap();
        prop_assert!(id.0 < cfg.num_states());
        prop_assert_eq!(sailing_decode(id, &cfg).unwrap(), state);
        prop_assert_eq!(sailing_encode(sailing_decode(id, &cfg).unwrap(), &cfg).unwrap(), id);
    }
}

#[test]
fn every_sailing_id_decodes_uniquely() {
    let cfg = SailingConfig::new(7);
    let mut seen = std::collections::HashSet::new();
    for id in 0..cfg.num_states() {
        let st = sailing_decode(StateId(id), &cfg).unwrap();
        assert!(seen.insert(st));
        assert_eq!(sailing_encode(st, &cfg).unwrap(), StateId(id));
    }
    assert!(sailing_decode(StateId(cfg.num_states()), &cfg).is_err());
    assert!(sailing_encode(SailingState { x: 7, y: 0, wind: 0 }, &cfg).is_err());
}
