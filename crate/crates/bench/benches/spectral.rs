use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wegnerlab_bench::Fixture;
use wegnerlab_core::spectral::kth_eigenvalue;
use wegnerlab_core::{assemble, count_below, eigenpair};

fn bench_count(c: &mut Criterion) {
    let mut group = c.benchmark_group("count_below");
    for l in [16u32, 64, 256] {
        let op = Fixture::new(l, 1).operator();
        group.bench_with_input(BenchmarkId::from_parameter(op.len()), &op, |b, op| {
            b.iter(|| count_below(op, black_box(4.0)).unwrap())
        });
    }
    group.finish();
}

fn bench_assemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for l in [16u32, 256] {
        let f = Fixture::new(l, 1);
        group.bench_function(BenchmarkId::from_parameter(l), |b| {
            b.iter(|| assemble(&f.model, &f.realization, &f.grid).unwrap())
        });
    }
    group.finish();
}

fn bench_eigenpair(c: &mut Criterion) {
    let op = Fixture::new(256, 1).operator();
    let value = kth_eigenvalue(&op, 0, 0.0).unwrap();
    c.bench_function("kth_eigenvalue/ground", |b| b.iter(|| kth_eigenvalue(&op, black_box(0), 0.0).unwrap()));
    c.bench_function("eigenpair/ground", |b| b.iter(|| eigenpair(&op, black_box(value)).unwrap()));
}

criterion_group!(benches, bench_count, bench_assemble, bench_eigenpair);
criterion_main!(benches);
