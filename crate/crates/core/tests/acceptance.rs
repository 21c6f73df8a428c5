//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured values and the pinned tolerance, then asserts.
//!
//! Run with `cargo test -p locpriv-core --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use locpriv_core::bounds::{eve_clean_crb_rmse, run_bounds};
use locpriv_core::config::default_scenario;
use locpriv_core::delay::{
    crb_delay, delay_report, mcrb_delay_closed, mcrb_delay_numeric, pseudo_true_delay, stationarity_residual,
};
use locpriv_core::montecarlo::{run_delay_trials, run_position_trials};
use locpriv_core::numerics::check_grad;
use locpriv_core::position::RangeObjective;
use locpriv_core::signal::clean_pilot;
use locpriv_core::sweep::{run_sweep, Preset, SweepSpec};
use locpriv_core::{AmScheme, AnScheme, Anchor, BMode, PilotScheme, Role, Scenario};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

#[test]
fn c01_am_position_bias() {
    let (res, took) = timed(|| {
        [(10.0, 7.39633), (30.0, 7.24623)].map(|(beta, target)| {
            let r = run_bounds(&scene(am(beta)), BMode::PaperLiteral).unwrap();
            (beta, r.position.bias_norm, target)
        })
    });
    let ok_vals = res.iter().all(|(_, got, want)| rel(*got, *want) < 0.01);
    let ok_time = took < Duration::from_secs(1);
    let detail = res
        .iter()
        .map(|(b, got, want)| format!("{b} dB -> {got:.5} m (target {want}, tol 1%)"))
        .collect::<Vec<_>>()
        .join("; ");
    let pass = verdict(1, "AM position bias", ok_vals && ok_time, &format!("{detail}; {took:.2?} (limit 1 s)"));
    assert!(pass);
}

#[test]
fn c02_high_snr_saturation() {
    let base = scene(am(10.0));
    let r10 = run_bounds(&at_power(&base, 10.0), BMode::PaperLiteral).unwrap().position;
    let r20 = run_bounds(&at_power(&base, 20.0), BMode::PaperLiteral).unwrap().position;
    let ok_level = rel(r10.mcrb_rmse, 5.79052) < 0.03 && rel(r10.rmse_lb, 9.39340) < 0.03;
    let drift_mcrb = rel(r20.mcrb_rmse, r10.mcrb_rmse);
    let drift_lb = rel(r20.rmse_lb, r10.rmse_lb);
    let ok_drift = drift_mcrb < 0.005 && drift_lb < 0.005;
    let pass = verdict(
        2,
        "high-SNR saturation",
        ok_level && ok_drift,
        &format!(
            "mcrb {:.5} m (target 5.79052, 3%), lb {:.5} m (target 9.39340, 3%), 10->20 dBm drift {:.2e}/{:.2e} (limit 0.5%)",
            r10.mcrb_rmse, r10.rmse_lb, drift_mcrb, drift_lb
        ),
    );
    assert!(pass);
}

#[test]
fn c03_lb_decomposition_identity() {
    let base = scene(PilotScheme::Clean);
    let mut worst: f64 = 0.0;
    let mut rows_checked = 0;
    let mut failed_points = 0;
    for preset in [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5a, Preset::Fig5b] {
        let rows = run_sweep(&SweepSpec::new(preset, base.clone())).unwrap();
        for row in &rows {
            match row.values() {
                Some(v) => {
                    let lhs = v.lb_eve * v.lb_eve;
                    let rhs = v.mcrb_eve * v.mcrb_eve + v.bias_eve * v.bias_eve;
                    worst = worst.max((lhs - rhs).abs() / lhs);
                    rows_checked += 1;
                }
                None => failed_points += 1,
            }
        }
    }
    let pass = verdict(
        3,
        "LB decomposition identity",
        worst < 1e-9 && failed_points == 0,
        &format!("{rows_checked} rows, worst relative gap {worst:.2e} (limit 1e-9), {failed_points} failed grid points"),
    );
    assert!(pass);
}

#[test]
fn c04_degeneracy() {
    let sc = calibrated(PilotScheme::Clean);
    let cfg = sc.config().clone();
    let inert = [
        PilotScheme::Clean,
        PilotScheme::Am(AmScheme::new(vec![0.0], vec![1e-8]).unwrap()),
        PilotScheme::An(AnScheme::from_seed(0.0, 1, &cfg).unwrap()),
    ];
    let mut worst_delay: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut worst_pos: f64 = 0.0;
    let mut worst_pos_bound: f64 = 0.0;
    let clean_crb = eve_clean_crb_rmse(&sc).unwrap();
    for scheme in inert {
        let s = sc.with_scheme(scheme).unwrap();
        let pilot = s.pilot().unwrap();
        for id in s.eve_ids() {
            let alpha = s.channel_gain(id).unwrap();
            let tau = s.true_delay(id).unwrap();
            let r = delay_report(&s, id, tau).unwrap();
            worst_delay = worst_delay.max(rel(r.mcrb, r.crb)).max((r.tau_pseudo - tau).abs() / tau);
            let closed = mcrb_delay_closed(&pilot, &cfg, alpha, tau, r.tau_pseudo).unwrap();
            worst_closed = worst_closed.max(rel(closed, crb_delay(&cfg, alpha)));
        }
        for mode in [BMode::PaperLiteral, BMode::TrueCovariance] {
            let p = run_bounds(&s, mode).unwrap().position;
            worst_pos = worst_pos.max(p.bias_norm);
            worst_pos_bound = worst_pos_bound.max(rel(p.mcrb_rmse, clean_crb)).max(rel(p.rmse_lb, clean_crb));
        }
    }
    let pass = verdict(
        4,
        "degeneracy suite",
        worst_delay < 1e-9 && worst_closed < 1e-9 && worst_pos < 1e-9 && worst_pos_bound < 1e-9,
        &format!(
            "delay |MCRB-CRB|/CRB {worst_delay:.1e}, closed form vs CRB {worst_closed:.1e}, |p_bar - p_A| {worst_pos:.1e} m, position MCRB/LB vs CRB {worst_pos_bound:.1e} (all limits 1e-9)"
        ),
    );
    assert!(pass);
}

#[test]
fn c05_decay_sweep_reproduction() {
    let spec = SweepSpec::new(Preset::Fig2, scene(PilotScheme::Clean));
    let (rows, took) = timed(|| run_sweep(&spec).unwrap());
    let lb = |t: f64, l: f64| {
        rows.iter()
            .find(|r| r.keys == [t, l])
            .and_then(|r| r.values())
            .map(|v| v.lb_eve)
            .unwrap_or(f64::NAN)
    };
    let flat = (3..=15).map(|l| lb(0.0, l as f64)).collect::<Vec<_>>();
    let flat_worst = flat.iter().map(|v| rel(*v, 4.93924)).fold(0.0, f64::max);
    let a = lb(-1.0, 10.0);
    let b = lb(1.0, 1.0);
    let order: Vec<f64> = [-1.0, 0.0, 1.0, 4.0, 8.0].iter().map(|t| lb(*t, 10.0)).collect();
    let ordered = order.windows(2).all(|w| w[0] < w[1]);
    let pass = verdict(
        5,
        "decay-factor sweep",
        flat_worst < 0.05 && rel(a, 2.85041) < 0.05 && rel(b, 9.57043) < 0.05 && ordered && took < Duration::from_secs(30),
        &format!(
            "t=0 L=3..15 worst dev {:.2}% (target 4.93924, 5%); t=-1 L=10 {a:.4} (target 2.85041); t=1 L=1 {b:.4} (target 9.57043); L=10 by t {:?} increasing={ordered}; {took:.2?} (limit 30 s)",
            flat_worst * 100.0,
            order.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn c06_calibrated_floor() {
    let raw = eve_clean_crb_rmse(&scene(PilotScheme::Clean)).unwrap();
    let cal = run_bounds(&calibrated(PilotScheme::Clean), BMode::PaperLiteral).unwrap().position.rmse_lb;
    let ok = rel(cal, 0.01904) < 0.05 && raw / 0.01904 < 2.0 && 0.01904 / raw < 2.0;
    let pass = verdict(
        6,
        "calibrated clean floor",
        ok,
        &format!(
            "calibrated ({GAIN_CALIBRATION}) {cal:.6} m (target 0.01904, 5%); free-space {raw:.6} m (ratio {:.3}, limit 2)",
            raw / 0.01904
        ),
    );
    assert!(pass);
}

#[test]
fn c07_monte_carlo_validation() {
    let (out, took) = timed(|| {
        let base = with_subcarriers(&calibrated(PilotScheme::Clean), 256);
        let am_sc = base.with_scheme(am(10.0)).unwrap();
        let n = 1000;
        let delay_z: Vec<f64> = am_sc
            .eve_ids()
            .into_iter()
            .map(|id| run_delay_trials(&am_sc, id, n, 11).unwrap().max_z_score())
            .collect();
        let pos = run_position_trials(&am_sc, n, 12, BMode::TrueCovariance).unwrap();
        let literal = run_bounds(&am_sc, BMode::PaperLiteral).unwrap().position.rmse_lb;
        let clean = run_delay_trials(&base, base.eve_ids()[0], n, 13).unwrap();
        let crb = delay_report(&base, base.eve_ids()[0], base.true_delay(base.eve_ids()[0]).unwrap())
            .unwrap()
            .crb;
        (delay_z, pos, literal, clean.empirical_variance[0] / crb)
    });
    let (delay_z, pos, literal, var_ratio) = out;
    let ok_mean = delay_z.iter().all(|z| *z < 3.0);
    let ok_rmse = pos.empirical_rmse >= 0.95 * pos.rmse_lb;
    let ok_var = (0.8..=1.3).contains(&var_ratio);
    let pass = verdict(
        7,
        "Monte-Carlo validation",
        ok_mean && ok_rmse && ok_var && took < Duration::from_secs(120),
        &format!(
            "delay mean z-scores {:?} (limit 3); position RMSE {:.4} m vs 0.95 x LB {:.4} m (true-covariance LB; literal LB {:.4} m); clean variance/CRB {var_ratio:.3} (range [0.8, 1.3]); {took:.2?} (limit 120 s)",
            delay_z.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>(),
            pos.empirical_rmse,
            0.95 * pos.rmse_lb,
            literal
        ),
    );
    assert!(pass);
}

fn with_eves(positions: &[[f64; 2]], scheme: PilotScheme) -> Scenario {
    let base = default_scenario(PilotScheme::Clean).unwrap();
    let anchors: Vec<Anchor> = positions.iter().map(|p| Anchor::new(p.to_vec(), Role::Eve)).collect();
    Scenario::new(
        base.alice().as_slice().to_vec(),
        anchors,
        base.config().clone(),
        scheme,
        base.speed_of_light(),
        1.0,
        base.seed_box().clone(),
    )
    .unwrap()
}

#[test]
fn c08_common_bias_across_eves() {
    let cfg = scene(PilotScheme::Clean).config().clone();
    let schemes = [am(10.0), an(30.0, 1, &cfg), an(10.0, 2, &cfg)];
    let layouts: [&[[f64; 2]]; 2] = [&[[0.0, 0.0], [80.0, 160.0]], &[[0.0, 0.0], [80.0, 160.0], [160.0, 10.0]]];
    let mut worst: f64 = 0.0;
    for scheme in &schemes {
        for layout in layouts {
            let sc = with_eves(layout, scheme.clone());
            let offsets: Vec<f64> = sc
                .eve_ids()
                .into_iter()
                .map(|id| {
                    let tau = sc.true_delay(id).unwrap();
                    pseudo_true_delay(sc.scheme(), sc.config(), tau).unwrap() - tau
                })
                .collect();
            let spread = offsets.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
                - offsets.iter().fold(f64::INFINITY, |a, b| a.min(*b));
            worst = worst.max(spread);
        }
    }
    let pass = verdict(8, "per-Eve bias agreement", worst < 1e-12, &format!("largest spread {worst:.2e} s (limit 1e-12 s)"));
    assert!(pass);
}

#[test]
fn c09_stationarity_and_gradient() {
    let sc = scene(PilotScheme::Clean);
    let cfg = sc.config().clone();
    let mut worst_stat: f64 = 0.0;
    for scheme in [am(10.0), am(30.0), an(30.0, 1, &cfg), an(25.0, 3, &cfg)] {
        let s = sc.with_scheme(scheme).unwrap();
        let pilot = s.pilot().unwrap();
        for id in s.eve_ids() {
            let tau = s.true_delay(id).unwrap();
            let tau0 = pseudo_true_delay(s.scheme(), &cfg, tau).unwrap();
            let (score, dn, en) = stationarity_residual(&pilot, &cfg, s.channel_gain(id).unwrap(), tau, tau0);
            worst_stat = worst_stat.max(score / (dn * en));
        }
    }

    let eves: Vec<DVector<f64>> = [[0.0, 0.0], [80.0, 160.0]].iter().map(|p| DVector::from_column_slice(p)).collect();
    let c = sc.speed_of_light();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_grad: f64 = 0.0;
    for _ in 0..100 {
        let tau = DVector::from_fn(2, |_, _| rng.random_range(50.0..150.0) / c);
        let var = DVector::from_fn(2, |_, _| rng.random_range(1e-24..1e-22));
        let obj = RangeObjective::new(&eves, &tau, &var, c).unwrap();
        let p = DVector::from_fn(2, |_, _| rng.random_range(5.0..195.0));
        worst_grad = worst_grad.max(check_grad(|x| obj.value(x), |x| obj.gradient(x), &p, 1e-4));
    }
    let pass = verdict(
        9,
        "stationarity and gradient checks",
        worst_stat < 1e-6 && worst_grad < 1e-5,
        &format!("worst |Re[e^H mu']|/(|mu'||e|) {worst_stat:.2e} (limit 1e-6); worst gradient error {worst_grad:.2e} (limit 1e-5)"),
    );
    assert!(pass);
}

#[test]
fn c10_an_realizations() {
    let base = scene(PilotScheme::Clean);
    let cfg = base.config().clone();
    let bias_at = |beta_db: f64, seed: u64| {
        let sc = base.with_scheme(an(beta_db, seed, &cfg)).unwrap();
        run_bounds(&sc, BMode::PaperLiteral).unwrap().position.bias_norm
    };
    let seeds: Vec<u64> = (1..=50).collect();
    let mut strong: Vec<f64> = seeds.iter().map(|s| bias_at(30.0, *s)).collect();
    strong.sort_by(f64::total_cmp);
    let median = (strong[24] + strong[25]) / 2.0;
    let all_nonzero = strong[0] > 0.0;
    let ok_strong = all_nonzero && (20.0..=60.0).contains(&median);

    let mut weak_summary = Vec::new();
    let mut ok_weak = true;
    for beta in [-20.0, -10.0, -5.0] {
        let biases: Vec<f64> = seeds.iter().map(|s| bias_at(beta, *s)).collect();
        let zero = biases.iter().filter(|b| **b < 1e-9).count();
        let typical = {
            let mut b = biases.clone();
            b.sort_by(f64::total_cmp);
            b[25]
        };
        ok_weak &= zero as f64 >= 0.9 * biases.len() as f64;
        weak_summary.push(format!("{beta} dB: {zero}/50 zero, median {typical:.3e} m"));
    }
    let pass = verdict(
        10,
        "AN realization behaviour",
        ok_strong && ok_weak,
        &format!(
            "30 dB: min {:.3} m, median {median:.2} m (range [20, 60]); below 0 dB (need >= 90% zero): {}",
            strong[0],
            weak_summary.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn c04_closed_form_tracks_numeric_route() {
    // informational cross-check of the printed closed form away from the limit
    let sc = scene(am(10.0));
    let cfg = sc.config().clone();
    let pilot = sc.pilot().unwrap();
    let id = sc.eve_ids()[0];
    let tau = sc.true_delay(id).unwrap();
    let tau0 = pseudo_true_delay(sc.scheme(), &cfg, tau).unwrap();
    let alpha = sc.channel_gain(id).unwrap();
    let numeric = mcrb_delay_numeric(&pilot, &cfg, alpha, tau, tau0).unwrap();
    let closed = mcrb_delay_closed(&pilot, &cfg, alpha, tau, tau0).unwrap();
    println!(
        "info: AM 10 dB delay MCRB numeric {numeric:.4e} s^2, closed form {closed:.4e} s^2 (relative deviation {:.3e})",
        rel(closed, numeric)
    );
    let clean = clean_pilot(&cfg);
    assert!(rel(mcrb_delay_closed(&clean, &cfg, alpha, tau, tau).unwrap(), crb_delay(&cfg, alpha)) < 1e-9);
}
