use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tmvn_core::{moments_auto, mvn_rect_prob, truncated_moments, QmcConfig, SymMatrix, TruncatedMvnSpec};

const INF: f64 = f64::INFINITY;

fn equicorrelation(d: usize, rho: f64) -> SymMatrix {
    let rows: Vec<Vec<f64>> =
        (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect()).collect();
    SymMatrix::from_rows(&rows).unwrap()
}

fn example1() -> TruncatedMvnSpec {
    TruncatedMvnSpec::new(
        vec![0.5, 0.5],
        SymMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 2.0]]).unwrap(),
        vec![-1.0, -INF],
        vec![0.5, 1.0],
    )
    .unwrap()
}

fn example2() -> TruncatedMvnSpec {
    TruncatedMvnSpec::new(
        vec![0.0; 3],
        SymMatrix::from_rows(&[vec![1.1, 1.2, 0.0], vec![1.2, 2.0, -0.8], vec![0.0, -0.8, 3.0]]).unwrap(),
        vec![-1.0, -INF, -INF],
        vec![0.5, INF, INF],
    )
    .unwrap()
}

fn rect_prob(c: &mut Criterion) {
    let cfg = QmcConfig::default();
    let mut group = c.benchmark_group("rect_prob");
    for d in [2usize, 5, 10] {
        let corr = equicorrelation(d, 0.5);
        let lower: Vec<f64> = (0..d).map(|i| -1.0 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..d).map(|i| 0.5 + 0.2 * i as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| mvn_rect_prob(black_box(&corr), &lower, &upper, &cfg).unwrap())
        });
    }
    group.finish();
}

fn moments(c: &mut Criterion) {
    let cfg = QmcConfig::default();
    let (ex1, ex2) = (example1(), example2());
    let mut group = c.benchmark_group("moments");
    group.bench_function("example1_full", |b| b.iter(|| truncated_moments(black_box(&ex1), &cfg).unwrap()));
    group.bench_function("example2_full", |b| b.iter(|| truncated_moments(black_box(&ex2), &cfg).unwrap()));
    group.bench_function("example2_auto", |b| b.iter(|| moments_auto(black_box(&ex2), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, rect_prob, moments);
criterion_main!(benches);
