use criterion::{criterion_group, criterion_main, Criterion};
use locpriv_core::config::default_scenario;
use locpriv_core::delay::pseudo_true_delay;
use locpriv_core::montecarlo::run_position_trials;
use locpriv_core::signal::db_to_linear;
use locpriv_core::{run_bounds, AmScheme, AnScheme, BMode, OfdmConfig, PilotScheme};
use std::hint::black_box;

fn am_scheme(beta_db: f64) -> PilotScheme {
    PilotScheme::Am(AmScheme::single(db_to_linear(beta_db), 1e-8).unwrap())
}

fn pseudo_true(c: &mut Criterion) {
    let sc = default_scenario(PilotScheme::Clean).unwrap();
    let cfg = sc.config().clone();
    let am = am_scheme(10.0);
    let an = PilotScheme::An(AnScheme::from_seed(db_to_linear(30.0), 1, &cfg).unwrap());
    c.bench_function("pseudo_true_delay/am", |b| b.iter(|| pseudo_true_delay(black_box(&am), &cfg, 3.77e-7)));
    c.bench_function("pseudo_true_delay/an", |b| b.iter(|| pseudo_true_delay(black_box(&an), &cfg, 3.77e-7)));
}

fn pipeline(c: &mut Criterion) {
    let sc = default_scenario(am_scheme(10.0)).unwrap();
    c.bench_function("run_bounds/am", |b| b.iter(|| run_bounds(black_box(&sc), BMode::PaperLiteral)));
}

fn monte_carlo(c: &mut Criterion) {
    let sc = default_scenario(am_scheme(10.0)).unwrap();
    let cfg = sc.config();
    let reduced = OfdmConfig::new(256, cfg.bandwidth(), cfg.carrier_freq(), cfg.tx_power(), cfg.noise_psd(), None).unwrap();
    let small = sc.with_config(reduced).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("position_trials/100", |b| {
        b.iter(|| run_position_trials(black_box(&small), 100, 7, BMode::TrueCovariance))
    });
    group.finish();
}

criterion_group!(benches, pseudo_true, pipeline, monte_carlo);
criterion_main!(benches);
