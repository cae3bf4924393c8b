//! Forest training and the sweep inner loop, parallel vs sequential.
//!
//! With default features the parallel path uses the rayon pool; the
//! sequential numbers use the explicit fallback, so one run compares both.
//! Build with `--no-default-features` to check the fallback-only build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cet::ml::forest::fit_forest_mode;
use cet::ml::{Hyperparams, TrainSet};

fn synthetic(n: usize, d: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_bool(0.5);
        y.push(label);
        for j in 0..d {
            let shift = if label && j % 3 == 0 { 0.6 } else { 0.0 };
            x.push(rng.gen_range(-1.0..1.0) + shift);
        }
    }
    (x, y)
}

fn bench_forest(c: &mut Criterion) {
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for &(n, d) in &[(500usize, 60usize), (2000, 120)] {
        let (x, y) = synthetic(n, d, 42);
        let ts = TrainSet::new(&x, d, &y).unwrap();
        let hp = Hyperparams { n_trees: 30, max_depth: 10, ..Hyperparams::default() };
        for parallel in [false, true] {
            if parallel && !cfg!(feature = "parallel") {
                continue;
            }
            let label = if parallel { "parallel" } else { "serial" };
            group.bench_with_input(
                BenchmarkId::new(label, format!("{n}x{d}")),
                &parallel,
                |b, &parallel| b.iter(|| fit_forest_mode(&ts, &hp, 7, parallel)),
            );
        }
        // Both modes must agree bit-for-bit regardless of thread count.
        if cfg!(feature = "parallel") {
            assert_eq!(
                serde_json::to_vec(&fit_forest_mode(&ts, &hp, 7, false)).unwrap(),
                serde_json::to_vec(&fit_forest_mode(&ts, &hp, 7, true)).unwrap()
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_forest);
criterion_main!(benches);
