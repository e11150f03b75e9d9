use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use epiprofile::experiments::{run_hit_experiment, Execution, Scenario};

fn replicate_throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("hit_experiment");
    group.sample_size(10);
    for replicates in [8u64, 32] {
        let mut cfg = Scenario::FastGrowth.config(replicates, 0);
        cfg.simulation.t_end = 51.0;
        cfg.observation_times = (1..=10).map(|k| f64::from(k) * 5.0).collect();
        for (label, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel { workers: None }),
        ] {
            group.bench_with_input(BenchmarkId::new(label, replicates), &cfg, |b, cfg| {
                b.iter(|| run_hit_experiment(black_box(cfg), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replicate_throughput);
criterion_main!(benches);
