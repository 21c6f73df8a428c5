#![allow(dead_code)]

use locpriv_core::config::default_scenario;
use locpriv_core::signal::{db_to_linear, dbm_to_watts};
use locpriv_core::{AmScheme, AnScheme, OfdmConfig, PilotScheme, Scenario};

/// Single fitted |alpha|^2 multiplier used wherever absolute noise levels
/// matter. Fitted once so that the clean eavesdropper-pair position CRB of the
/// default scene equals 0.01904 m; the free-space value without it is
/// 0.02693 m.
pub const GAIN_CALIBRATION: f64 = 2.0;

pub fn scene(scheme: PilotScheme) -> Scenario {
    default_scenario(scheme).unwrap()
}

pub fn calibrated(scheme: PilotScheme) -> Scenario {
    scene(scheme).with_gain_calibration(GAIN_CALIBRATION).unwrap()
}

pub fn am(beta_db: f64) -> PilotScheme {
    PilotScheme::Am(AmScheme::single(db_to_linear(beta_db), 1e-8).unwrap())
}

pub fn an(beta_db: f64, seed: u64, cfg: &OfdmConfig) -> PilotScheme {
    PilotScheme::An(AnScheme::from_seed(db_to_linear(beta_db), seed, cfg).unwrap())
}

pub fn at_power(sc: &Scenario, dbm: f64) -> Scenario {
    sc.with_config(sc.config().with_tx_power(dbm_to_watts(dbm)).unwrap()).unwrap()
}

/// Same scene with `m` subcarriers over the same bandwidth.
pub fn with_subcarriers(sc: &Scenario, m: usize) -> Scenario {
    let c = sc.config();
    let cfg = OfdmConfig::new(m, c.bandwidth(), c.carrier_freq(), c.tx_power(), c.noise_psd(), None).unwrap();
    sc.with_scheme(PilotScheme::Clean).unwrap().with_config(cfg).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
