use criterion::{criterion_group, criterion_main, Criterion};
use qrisk::models::{DependenceModel, ScenarioKind};
use qrisk::polyrat::{find_roots, Polynomial, DEFAULT_ROOT_TOL};

fn bench_analyze(c: &mut Criterion) {
    let weights = vec![1.0 / 7.0; 7];
    let model =
        DependenceModel::build_scenario(ScenarioKind::Negative, &weights, 0.5, 1.0, 1.0).unwrap();
    c.bench_function("analyze negative K=7", |b| {
        b.iter(|| qrisk::analyze(std::hint::black_box(&model)).unwrap())
    });
    c.bench_function("factorize negative K=7", |b| {
        let yt = model.y_transform();
        b.iter(|| qrisk::factorize(std::hint::black_box(&yt)).unwrap())
    });
}

fn bench_roots(c: &mut Criterion) {
    // degree-28 polynomial with well-spread real roots
    let roots: Vec<(num_complex::Complex64, usize)> = (1..=28)
        .map(|k| (num_complex::Complex64::new(-(k as f64) * 0.37 - 0.1, 0.0), 1))
        .collect();
    let p = Polynomial::from_roots(num_complex::Complex64::new(1.0, 0.0), &roots);
    c.bench_function("find_roots degree 28", |b| {
        b.iter(|| find_roots(std::hint::black_box(&p), DEFAULT_ROOT_TOL).unwrap())
    });
}

criterion_group!(benches, bench_analyze, bench_roots);
criterion_main!(benches);
