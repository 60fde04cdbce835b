use criterion::{criterion_group, criterion_main, Criterion};
use ctd_bench::noisy_corpus;
use ctd_core::metrics::{ami, bosdis, cbm, ci, posdis, CI_DEFAULT_ITERS};

fn metrics(c: &mut Criterion) {
    let corpus = noisy_corpus(1000, 50, 5, 0.1, 7);
    let mut g = c.benchmark_group("metrics_1000x5");
    g.bench_function("ami", |b| b.iter(|| ami(&corpus).unwrap()));
    g.bench_function("cbm", |b| b.iter(|| cbm(&corpus).unwrap()));
    g.bench_function("ci", |b| b.iter(|| ci(&corpus, CI_DEFAULT_ITERS).unwrap()));
    g.bench_function("posdis", |b| b.iter(|| posdis(&corpus).unwrap()));
    g.bench_function("bosdis", |b| b.iter(|| bosdis(&corpus).unwrap()));
    g.finish();
}

criterion_group!(benches, metrics);
criterion_main!(benches);
