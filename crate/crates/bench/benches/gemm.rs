use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctd_bench::random_matrix;
use ctd_core::diffcore::Tape;

fn gemm(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul_fwd_bwd");
    for &(m, k, n) in &[(200, 270, 100), (10, 1000, 64), (200, 100, 1000)] {
        let a = random_matrix(m, k, 1);
        let b = random_matrix(k, n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{k}x{n}")), &(a, b), |bench, (a, b)| {
            bench.iter(|| {
                let mut t = Tape::new();
                let av = t.variable(a.clone()).unwrap();
                let bv = t.variable(b.clone()).unwrap();
                let y = t.matmul(av, bv).unwrap();
                let s = t.sum(y).unwrap();
                t.backward(s).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, gemm);
criterion_main!(benches);
