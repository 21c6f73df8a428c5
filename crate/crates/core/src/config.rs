//! JSON configuration: scene, pilot scheme and sweep settings.
//!
//! Every field is optional; omitted fields take the default scene (Alice at
//! (80, 80) m, legitimate anchors at (0, 0), (90, 0), (80, 160) m and
//! eavesdroppers at (0, 0), (80, 160) m, 28 GHz carrier, 100 MHz over 1024
//! subcarriers, 10 dBm, -173.855 dBm/Hz). Power-like quantities are given in
//! dB units here and converted to linear units once, on load.
//!
//! ```json
//! {
//!   "spec_version": 1,
//!   "scenario": {
//!     "alice": [80, 80],
//!     "anchors": [{ "position": [0, 0], "role": "eve" }],
//!     "num_subcarriers": 1024,
//!     "bandwidth_hz": 100e6,
//!     "carrier_freq_hz": 28e9,
//!     "tx_power_dbm": 10,
//!     "noise_psd_dbm_hz": -173.855,
//!     "cp_duration_s": null,
//!     "speed_of_light": 299792458,
//!     "gain_calibration": 1.0,
//!     "seed_box": { "lo": [0, 0], "hi": [200, 200] }
//!   },
//!   "scheme": { "type": "am", "gains_db": [10], "delays_s": [1e-8] },
//!   "sweep": { "preset": "fig4", "an_seed": 1 }
//! }
//! ```
//!
//! Scheme variants: `{"type": "clean"}`, `{"type": "am", "gains_db": [..],
//! "delays_s": [..]}` (or `"delays_res"` in units of `1/W`), `{"type":
//! "am_decay", "paths": L, "decay_t": t}` and `{"type": "an", "strength_db": x,
//! "seed": s}`. Anchor gains are `"free_space"` (default) or
//! `{"fixed": [re, im]}`.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numerics::BoundingBox;
use crate::scenario::{Anchor, Role, Scenario};
use crate::signal::{db_to_linear, dbm_to_watts, AmScheme, AnScheme, GainModel, OfdmConfig, PilotScheme, SPEED_OF_LIGHT};
use crate::sweep::Preset;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spec_version: Option<u32>,
    #[serde(default)]
    pub scenario: SceneSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub alice: Option<Vec<f64>>,
    pub anchors: Option<Vec<AnchorEntry>>,
    pub num_subcarriers: Option<usize>,
    pub bandwidth_hz: Option<f64>,
    pub carrier_freq_hz: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub noise_psd_dbm_hz: Option<f64>,
    pub cp_duration_s: Option<f64>,
    pub speed_of_light: Option<f64>,
    pub gain_calibration: Option<f64>,
    pub seed_box: Option<BoxEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    pub position: Vec<f64>,
    pub role: RoleEntry,
    #[serde(default)]
    pub gain: GainEntry,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleEntry {
    Legit,
    Eve,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainEntry {
    #[default]
    FreeSpace,
    Fixed([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSection {
    #[default]
    Clean,
    Am {
        gains_db: Vec<f64>,
        delays_s: Option<Vec<f64>>,
        delays_res: Option<Vec<f64>>,
    },
    AmDecay {
        paths: usize,
        decay_t: f64,
    },
    An {
        strength_db: f64,
        #[serde(default = "default_an_seed")]
        seed: u64,
    },
}

fn default_an_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub preset: Option<Preset>,
    /// Seed of the AN perturbation reused across the sweep.
    pub an_seed: Option<u64>,
    /// Overrides the preset's primary grid.
    pub values: Option<Vec<f64>>,
    /// Overrides the preset's secondary grid (FIG2 decay factors, FIG3 delays).
    pub secondary_values: Option<Vec<f64>>,
}

/// Parses a configuration document. Blank input is the empty document.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    match cfg.spec_version {
        None | Some(CONFIG_VERSION) => Ok(cfg),
        Some(v) => Err(Error::Validation(format!(
            "unsupported spec_version {v} (this build reads version {CONFIG_VERSION})"
        ))),
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_config(path)?.scenario()
}

/// The default scene with a given scheme.
pub fn default_scenario(scheme: PilotScheme) -> Result<Scenario> {
    ConfigFile::default().scenario()?.with_scheme(scheme)
}

pub fn default_anchors() -> Vec<Anchor> {
    vec![
        Anchor::new(vec![0.0, 0.0], Role::Legit),
        Anchor::new(vec![90.0, 0.0], Role::Legit),
        Anchor::new(vec![80.0, 160.0], Role::Legit),
        Anchor::new(vec![0.0, 0.0], Role::Eve),
        Anchor::new(vec![80.0, 160.0], Role::Eve),
    ]
}

impl SceneSection {
    pub fn ofdm(&self) -> Result<OfdmConfig> {
        OfdmConfig::new(
            self.num_subcarriers.unwrap_or(1024),
            self.bandwidth_hz.unwrap_or(100e6),
            self.carrier_freq_hz.unwrap_or(28e9),
            dbm_to_watts(self.tx_power_dbm.unwrap_or(10.0)),
            dbm_to_watts(self.noise_psd_dbm_hz.unwrap_or(-173.855)),
            self.cp_duration_s,
        )
    }

    fn anchors(&self) -> Vec<Anchor> {
        match &self.anchors {
            None => default_anchors(),
            Some(list) => list
                .iter()
                .map(|a| {
                    let role = match a.role {
                        RoleEntry::Legit => Role::Legit,
                        RoleEntry::Eve => Role::Eve,
                    };
                    let gain = match a.gain {
                        GainEntry::FreeSpace => GainModel::FreeSpace,
                        GainEntry::Fixed([re, im]) => GainModel::Fixed(Complex64::new(re, im)),
                    };
                    Anchor::new(a.position.clone(), role).with_gain(gain)
                })
                .collect(),
        }
    }
}

impl SchemeSection {
    pub fn build(&self, cfg: &OfdmConfig) -> Result<PilotScheme> {
        Ok(match self {
            SchemeSection::Clean => PilotScheme::Clean,
            SchemeSection::Am {
                gains_db,
                delays_s,
                delays_res,
            } => {
                let delays = match (delays_s, delays_res) {
                    (Some(d), None) => d.clone(),
                    (None, Some(d)) => d.iter().map(|x| x * cfg.time_resolution()).collect(),
                    _ => {
                        return Err(Error::Validation(
                            "AM scheme needs exactly one of delays_s or delays_res".into(),
                        ))
                    }
                };
                PilotScheme::Am(AmScheme::new(gains_db.iter().map(|g| db_to_linear(*g)).collect(), delays)?)
            }
            SchemeSection::AmDecay { paths, decay_t } => {
                PilotScheme::Am(AmScheme::with_decay(*paths, *decay_t, cfg.bandwidth())?)
            }
            SchemeSection::An { strength_db, seed } => {
                PilotScheme::An(AnScheme::from_seed(db_to_linear(*strength_db), *seed, cfg)?)
            }
        })
    }
}

impl ConfigFile {
    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        let cfg = s.ofdm()?;
        let scheme = self.scheme.build(&cfg)?;
        let alice = s.alice.clone().unwrap_or_else(|| vec![80.0, 80.0]);
        let seed_box = match &s.seed_box {
            Some(b) => BoundingBox::new(b.lo.clone(), b.hi.clone())?,
            None => {
                let dim = alice.len();
                BoundingBox::new(vec![0.0; dim], vec![200.0; dim])?
            }
        };
        Scenario::new(
            alice,
            s.anchors(),
            cfg,
            scheme,
            s.speed_of_light.unwrap_or(SPEED_OF_LIGHT),
            s.gain_calibration.unwrap_or(1.0),
            seed_box,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_scene() {
        let sc = parse_config("{}").unwrap().scenario().unwrap();
        assert_eq!(sc.alice().as_slice(), &[80.0, 80.0]);
        assert_eq!(sc.eve_ids(), vec![3, 4]);
        assert_eq!(sc.legit_ids(), vec![0, 1, 2]);
        assert_eq!(sc.config().num_subcarriers(), 1024);
        assert!((sc.config().tx_power() - 0.01).abs() < 1e-15);
        assert_eq!(*sc.scheme(), PilotScheme::Clean);
        assert_eq!(sc.gain_calibration(), 1.0);
        assert_eq!(parse_config("  ").unwrap().scenario().unwrap(), sc);
    }

    #[test]
    fn zero_subcarriers_rejected() {
        let err = parse_config(r#"{"scenario": {"num_subcarriers": 0}}"#).unwrap().scenario().unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn schema_errors_carry_path() {
        let err = parse_config(r#"{"scenario": {"anchors": [{"position": [0, 0], "role": "bob"}]}}"#).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "scenario.anchors[0].role"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_config(r#"{"scenaro": {}}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn three_eve_override() {
        let text = r#"{"scenario": {"anchors": [
            {"position": [0, 0], "role": "eve"},
            {"position": [80, 160], "role": "eve"},
            {"position": [160, 0], "role": "eve", "gain": {"fixed": [1e-5, 0]}}
        ]}}"#;
        let sc = parse_config(text).unwrap().scenario().unwrap();
        assert_eq!(sc.eve_ids().len(), 3);
        assert_eq!(sc.anchors()[2].gain, GainModel::Fixed(Complex64::new(1e-5, 0.0)));
    }

    #[test]
    fn scheme_variants() {
        let am = parse_config(r#"{"scheme": {"type": "am", "gains_db": [10], "delays_res": [1]}}"#)
            .unwrap()
            .scenario()
            .unwrap();
        match am.scheme() {
            PilotScheme::Am(s) => {
                assert!((s.gains()[0] - 10.0).abs() < 1e-12);
                assert!((s.delays()[0] - 1e-8).abs() < 1e-22);
            }
            other => panic!("unexpected {other:?}"),
        }
        let decay = parse_config(r#"{"scheme": {"type": "am_decay", "paths": 3, "decay_t": 0}}"#)
            .unwrap()
            .scenario()
            .unwrap();
        assert!(matches!(decay.scheme(), PilotScheme::Am(s) if s.num_paths() == 3));
        let an = parse_config(r#"{"scheme": {"type": "an", "strength_db": 30}}"#).unwrap().scenario().unwrap();
        assert!(matches!(an.scheme(), PilotScheme::An(s) if s.seed() == 1));
    }

    #[test]
    fn delay_beyond_cp_rejected() {
        let err = parse_config(r#"{"scheme": {"type": "am", "gains_db": [0], "delays_s": [1e-3]}}"#)
            .unwrap()
            .scenario()
            .unwrap_err();
        assert!(matches!(err, Error::DelayExceedsCp { .. }));
    }

    #[test]
    fn version_checked() {
        assert!(parse_config(r#"{"spec_version": 1}"#).is_ok());
        assert!(matches!(parse_config(r#"{"spec_version": 2}"#), Err(Error::Validation(_))));
    }
}
