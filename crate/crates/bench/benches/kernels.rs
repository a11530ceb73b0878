use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fluctuation::ladder::{estimate_ladder, LadderConfig, NegativeStep, WalkSpec};
use fluctuation::limit_laws::{fdd_theta, w_cdf, LawParams};
use fluctuation::simulate::{sample_conditional, SampleRequest};
use fluctuation::stable_law::{h1, H1Table, StableIndex};
use fluctuation::{Case, JumpFamily, ModelSpec, NegativeComponent};

fn stable_density(c: &mut Criterion) {
    let idx = StableIndex::new(0.5).unwrap();
    let far = StableIndex::new(0.3).unwrap();
    let table = H1Table::new(idx).unwrap();
    c.bench_function("h1 exact, index 1/2", |b| b.iter(|| h1(idx, black_box(0.7)).unwrap()));
    c.bench_function("h1 exact, index 0.3", |b| b.iter(|| h1(far, black_box(0.7)).unwrap()));
    c.bench_function("h1 table, index 1/2", |b| b.iter(|| table.h1(black_box(0.7)).unwrap()));
}

fn limit_laws(c: &mut Criterion) {
    let p = LawParams::new(Case::I, 2.5, 0.5).unwrap();
    c.bench_function("W cdf by quadrature", |b| b.iter(|| w_cdf(&p, black_box(1.3)).unwrap()));
    c.bench_function("two-time theta", |b| b.iter(|| fdd_theta(&p, black_box(&[0.4, 1.1]), &[0.5, 1.0], 1.2).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let drift = ModelSpec::new(JumpFamily::Pareto { beta: 2.5, scale: 1.0 }, 1.0, NegativeComponent::Drift { rate: 2.0 }).unwrap();
    let stable = ModelSpec::new(
        JumpFamily::Pareto { beta: 2.5, scale: 1.0 },
        1.0,
        NegativeComponent::StableSubordinator { index: 0.5, scale: 1.0 },
    )
    .unwrap();
    let mut g = c.benchmark_group("conditional sampling, 1000 draws");
    g.sample_size(10);
    g.bench_function("drift, u = 200", |b| b.iter(|| sample_conditional(&drift, 200.0, &SampleRequest::new(1000, 1)).unwrap()));
    g.bench_function("stable, u = 1e4", |b| b.iter(|| sample_conditional(&stable, 1e4, &SampleRequest::new(1000, 1)).unwrap()));
    g.finish();
}

fn ladder(c: &mut Criterion) {
    let walk = WalkSpec::new(
        0.3,
        JumpFamily::Pareto { beta: 3.0, scale: 1.0 },
        NegativeStep::Law(JumpFamily::Weibull { kappa: 1.0, scale: 0.65 / 0.7 }),
    )
    .unwrap();
    let mut g = c.benchmark_group("ladder");
    g.sample_size(10);
    g.bench_function("calibration walk, 1e4 paths", |b| b.iter(|| estimate_ladder(&walk, &LadderConfig::new(10_000, 1)).unwrap()));
    g.finish();
}

criterion_group!(benches, stable_density, limit_laws, sampling, ladder);
criterion_main!(benches);
