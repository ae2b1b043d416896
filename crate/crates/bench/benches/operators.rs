use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asyncq_core::mdp::random_mdp;
use asyncq_core::sailing::{Sailing, SailingConfig};
use asyncq_core::solver::{compute_q_sample, snapshot_values, SharedTable};
use asyncq_core::{bellman_apply, ActionId, GenerativeModel, QTable, StateId};

fn bellman(c: &mut Criterion) {
    let mut group = c.benchmark_group("bellman_apply");
    for s in [50, 200, 1000] {
        let mdp = random_mdp(s, 4, 0.1, 0.9, &mut ChaCha8Rng::seed_from_u64(1));
        let q = QTable::filled(s, 4, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, _| {
            b.iter(|| bellman_apply(black_box(&q), &mdp).unwrap())
        });
    }
    group.finish();
}

fn sampled_update(c: &mut Criterion) {
    let gm = Sailing::new(SailingConfig::new(20)).unwrap();
    let v = vec![1.0; gm.num_states()];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("compute_q_sample_sailing");
    for k in [1u64, 5, 35] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| compute_q_sample(&gm, StateId(1234), ActionId(3), &v, k, 0.5, 0.95, true, &mut rng))
        });
    }
    group.finish();

    let mdp = random_mdp(100, 4, 0.2, 0.9, &mut ChaCha8Rng::seed_from_u64(3));
    let v = vec![1.0; 100];
    c.bench_function("sample_means_tabular_k1e6", |b| {
        b.iter(|| mdp.sample_means(StateId(7), ActionId(1), 1_000_000, black_box(&v), &mut rng))
    });
}

fn snapshot(c: &mut Criterion) {
    let table = SharedTable::new(3200, 8, false);
    c.bench_function("snapshot_3200_states", |b| b.iter(|| snapshot_values(black_box(&table))));
}

criterion_group!(benches, bellman, sampled_update, snapshot);
criterion_main!(benches);
