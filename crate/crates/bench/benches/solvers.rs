use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gacha_core::classes::{self, ClassKind, Granularity};
use gacha_core::exponential::optimal_schedule;
use gacha_core::montecarlo::simulate;
use gacha_core::{cpt, naive, CptParams, SimConfig, SimMechanism, SolverOptions, WeightingFn};

fn static_multiplier(c: &mut Criterion) {
    let w = WeightingFn::tversky_kahneman(0.65).unwrap();
    c.bench_function("static_multiplier", |b| b.iter(|| cpt::static_multiplier(black_box(&w)).unwrap()));
}

fn exponential(c: &mut Criterion) {
    let p = CptParams::default();
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("exponential");
    g.sample_size(10);
    g.bench_function("optimal_schedule_1e-3", |b| b.iter(|| optimal_schedule(black_box(&p), &opts).unwrap()));
    g.finish();
}

fn class_optimum(c: &mut Criterion) {
    let p = CptParams::default();
    let mut g = c.benchmark_group("classes");
    for kind in [ClassKind::Stationary, ClassKind::HardPity, ClassKind::Modified] {
        g.bench_function(kind.name(), |b| b.iter(|| classes::optimize(kind, black_box(&p), &Granularity::FineLimit).unwrap()));
    }
    g.finish();
}

fn naive_box(c: &mut Criterion) {
    let p = CptParams::default().with_delta(0.95).unwrap();
    c.bench_function("naive_loot_box", |b| b.iter(|| naive::optimal_loot_box(black_box(&p)).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let p = CptParams::default();
    let o = cpt::optimal_static_price(&p).unwrap();
    let cfg = SimConfig::new(SimMechanism::Static(o.menu.payment.clone()), 100_000, 7);
    let mut g = c.benchmark_group("montecarlo");
    g.sample_size(20);
    g.bench_function("static_100k", |b| b.iter(|| simulate(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, static_multiplier, exponential, class_optimum, naive_box, monte_carlo);
criterion_main!(benches);
