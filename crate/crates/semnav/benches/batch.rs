//! Batch throughput: sequential (one worker) vs data-parallel episode loop.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use semnav::explorer::ExplorerConfig;
use semnav::runner::{run_batch, BatchOptions, RunnerOptions};
use semnav::scorer::{OracleScorer, Scorer};
use semnav::simworld::{generate_world, SimParams};
use semnav::value_map::ConeParams;

fn bench_batch(c: &mut Criterion) {
    let sim = SimParams::default();
    let config = ExplorerConfig { target_category: "tv".into(), ..ExplorerConfig::default() };
    let mut group = c.benchmark_group("episode_batch");
    group.sample_size(10);
    for (label, threads) in [("sequential", Some(1)), ("parallel", None)] {
        group.bench_with_input(BenchmarkId::new(label, 8), &threads, |b, &threads| {
            b.iter(|| {
                run_batch(
                    8,
                    1,
                    |_i, seed| generate_world(seed, 4, 64, 64),
                    |i| -> Box<dyn Scorer> {
                        Box::new(OracleScorer::new(
                            Arc::new(generate_world(1 + i as u64, 4, 64, 64)),
                            ConeParams::default(),
                        ))
                    },
                    &config,
                    &sim,
                    &BatchOptions { threads, runner: RunnerOptions::default() },
                )
                .summary
                .success_rate
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
