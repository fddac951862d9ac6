use criterion::{black_box, criterion_group, criterion_main, Criterion};
use powgame_core::{
    calibrate, equilibrium_investment, finite_difference_check, reward_sweep, sensitivities, CalibrationSpec,
    GameParams,
};

fn statics(c: &mut Criterion) {
    let costs = [0.4, 0.7, 1.0, 1.1, 3.0];
    let params = GameParams::quadratic(5.0, 0.8).unwrap();
    c.bench_function("sensitivities", |b| b.iter(|| sensitivities(black_box(&costs), &params).unwrap()));
    c.bench_function("finite_difference_check", |b| {
        b.iter(|| finite_difference_check(black_box(&costs), &params, 1e-6).unwrap())
    });
}

fn investment(c: &mut Criterion) {
    let model = calibrate(&CalibrationSpec::default()).unwrap();
    let pop = model.pop.with_adjustment_scale(2.0).unwrap();
    c.bench_function("equilibrium_investment_calibrated", |b| {
        b.iter(|| equilibrium_investment(black_box(&pop), &model.params).unwrap())
    });
}

fn sweep(c: &mut Criterion) {
    let model = calibrate(&CalibrationSpec::default()).unwrap();
    let mults: Vec<f64> = (1..=64).map(|k| k as f64 / 16.0).collect();
    c.bench_function("reward_sweep_64", |b| {
        b.iter(|| reward_sweep(model.pop.initial_costs(), &model.params, black_box(&mults)).unwrap())
    });
}

criterion_group!(benches, statics, investment, sweep);
criterion_main!(benches);
