use criterion::{criterion_group, criterion_main, Criterion};
use eid_cloud::batch;
use eid_cloud::pre::Backend;
use eid_cloud::scenario::Scenario;
use eid_cloud::world::sra_setup;

fn six_runs(c: &mut Criterion) {
    let world = sra_setup(&Scenario::default_scenario(), 1, Backend::Pairing).expect("world");
    let jobs = batch::matrix();
    let mut g = c.benchmark_group("six_runs");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| batch::run_sequential(&world, &jobs)));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| batch::run_parallel(&world, &jobs)));
    g.finish();
}

criterion_group!(benches, six_runs);
criterion_main!(benches);
