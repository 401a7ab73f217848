use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfosa_core::data::{make_ambiguous, SparseDataset};
use vfosa_core::par::Execution;
use vfosa_core::problems::{build_logistic_minimax, build_matrix_game, MatrixGameSpec, RegKind};
use vfosa_core::GeProblem;

fn logistic(n: usize) -> GeProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = SparseDataset::synthetic(n, 49, &mut rng)
        .unwrap()
        .preprocess();
    let amb = make_ambiguous(&ds, 10, 0.05, &mut rng).unwrap();
    build_logistic_minimax(Arc::new(amb), &ds.labels, RegKind::L1, 5e-3).unwrap()
}

fn game(samples: usize) -> GeProblem {
    build_matrix_game(
        &MatrixGameSpec::new(100, samples),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap()
    .0
}

fn bench_full(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_operator");
    group.sample_size(20);
    let cases = [
        ("logistic", 2_000, logistic(2_000)),
        ("logistic", 20_000, logistic(20_000)),
        ("game", 1_000, game(1_000)),
    ];
    for (name, n, problem) in cases {
        let x: Vec<f64> = (0..problem.dim())
            .map(|k| 0.01 * ((k % 7) as f64 - 3.0))
            .collect();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let p = problem.clone().with_execution(exec);
            group.bench_with_input(
                BenchmarkId::new(format!("{name}/{exec:?}"), n),
                &x,
                |b, x| b.iter(|| black_box(p.full(black_box(x)))),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_full);
criterion_main!(benches);
