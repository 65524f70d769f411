use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use satin::batch::run_batch_parallel;
use satin::batch::run_batch_sequential;
use satin::cnf::gen::random_ksat;
use satin::cnf::Formula;
use satin::sim::SimConfig;

fn corpus() -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..16)
        .map(|_| {
            let n = rng.gen_range(20..=30);
            random_ksat(n, (n as f64 * 4.26).round() as usize, 3, &mut rng)
        })
        .collect()
}

fn batch(c: &mut Criterion) {
    let formulas = corpus();
    let cfg = SimConfig {
        oracle_check: false,
        ..SimConfig::default()
    };
    let jobs: Vec<_> = formulas.iter().map(|f| (cfg.clone(), f)).collect();
    let mut g = c.benchmark_group("batch16");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| run_batch_sequential(&jobs)));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| run_batch_parallel(&jobs)));
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
