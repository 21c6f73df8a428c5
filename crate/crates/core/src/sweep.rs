//! Parameter sweeps over the default scene and their CSV output.
//!
//! Each preset fixes which quantity is swept, the grid, and the pilot schemes
//! evaluated per grid point. The CSV has one line per grid point: the swept
//! values, then `crb_bob`, `bias_eve`, `mcrb_eve`, `lb_eve` for every scheme
//! (prefixed `am_` / `an_`), then `an_seed` when AN is evaluated, then an
//! `error` column that is empty unless a grid point failed. All errors are in
//! metres.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::run_bounds;
use crate::error::{Error, Result};
use crate::position::BMode;
use crate::scenario::Scenario;
use crate::signal::{db_to_linear, dbm_to_watts, AmScheme, AnScheme, PilotScheme, SchemeTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Lower bound versus the number of injected paths for several decay factors.
    Fig2,
    /// Single injected path: gain versus normalized delay.
    Fig3,
    /// Injection strength sweep for both schemes.
    Fig4,
    /// Transmit power sweep at 10 dB injection.
    Fig5a,
    /// Transmit power sweep at 30 dB injection.
    Fig5b,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5a" => Ok(Preset::Fig5a),
            "fig5b" => Ok(Preset::Fig5b),
            other => Err(Error::Validation(format!("unknown preset `{other}`"))),
        }
    }
}

fn range(from: i32, to: i32, step: i32) -> impl Iterator<Item = f64> {
    (from..=to).step_by(step as usize).map(f64::from)
}

impl Preset {
    pub fn key_names(self) -> &'static [&'static str] {
        match self {
            Preset::Fig2 => &["decay_t", "paths"],
            Preset::Fig3 => &["beta_db", "delay_res"],
            Preset::Fig4 => &["beta_db"],
            Preset::Fig5a | Preset::Fig5b => &["tx_power_dbm"],
        }
    }

    pub fn schemes(self) -> &'static [SchemeTag] {
        match self {
            Preset::Fig2 | Preset::Fig3 => &[SchemeTag::Am],
            _ => &[SchemeTag::Am, SchemeTag::An],
        }
    }

    /// Default primary grid: paths (FIG2), gain in dB (FIG3, FIG4) or transmit
    /// power in dBm (FIG5).
    pub fn primary_grid(self) -> Vec<f64> {
        match self {
            Preset::Fig2 => range(1, 15, 1).collect(),
            Preset::Fig3 => range(-10, 20, 1).collect(),
            Preset::Fig4 => range(-20, 0, 5).chain(range(1, 25, 1)).chain(range(30, 50, 5)).collect(),
            Preset::Fig5a => range(-70, -40, 5).chain(range(-39, -31, 1)).chain(range(-30, 20, 5)).collect(),
            Preset::Fig5b => range(-70, 20, 5).collect(),
        }
    }

    /// Default secondary grid: decay factors (FIG2), normalized delays in
    /// `[0, 1)` (FIG3), or the fixed injection level in dB (FIG5).
    pub fn secondary_grid(self) -> Vec<f64> {
        match self {
            Preset::Fig2 => vec![-2.0, -1.0, 0.0, 1.0, 4.0, 8.0],
            Preset::Fig3 => (0..21).map(|k| k as f64 / 21.0).collect(),
            Preset::Fig4 => Vec::new(),
            Preset::Fig5a => vec![10.0],
            Preset::Fig5b => vec![30.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub preset: Preset,
    pub primary: Vec<f64>,
    pub secondary: Vec<f64>,
    pub an_seed: u64,
    pub b_mode: BMode,
    pub base: Scenario,
}

impl SweepSpec {
    pub fn new(preset: Preset, base: Scenario) -> Self {
        Self {
            preset,
            primary: preset.primary_grid(),
            secondary: preset.secondary_grid(),
            an_seed: 1,
            b_mode: BMode::default(),
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.primary.is_empty() {
            return Err(Error::Validation("sweep grid is empty".into()));
        }
        if self.primary.iter().chain(&self.secondary).any(|v| !v.is_finite()) {
            return Err(Error::Validation("sweep values must be finite".into()));
        }
        match self.preset {
            Preset::Fig2 => {
                if self.secondary.is_empty() {
                    return Err(Error::Validation("FIG2 needs at least one decay factor".into()));
                }
                if self.primary.iter().any(|l| *l < 1.0 || l.fract() != 0.0) {
                    return Err(Error::Validation("path counts must be positive integers".into()));
                }
            }
            Preset::Fig3 => {
                if self.secondary.is_empty() || self.secondary.iter().any(|d| !(0.0..1.0).contains(d)) {
                    return Err(Error::Validation("normalized delays must lie in [0, 1)".into()));
                }
            }
            Preset::Fig4 => {}
            Preset::Fig5a | Preset::Fig5b => {
                if self.secondary.len() != 1 {
                    return Err(Error::Validation("power sweeps take exactly one injection level".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid points in output order; FIG2 and FIG3 iterate the first key
    /// outermost.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        match self.preset {
            Preset::Fig2 => self
                .secondary
                .iter()
                .flat_map(|t| self.primary.iter().map(move |l| vec![*t, *l]))
                .collect(),
            Preset::Fig3 => self
                .primary
                .iter()
                .flat_map(|b| self.secondary.iter().map(move |d| vec![*b, *d]))
                .collect(),
            _ => self.primary.iter().map(|x| vec![*x]).collect(),
        }
    }

    fn scenario_at(&self, keys: &[f64], tag: SchemeTag) -> Result<Scenario> {
        let base = &self.base;
        let cfg = base.config();
        let res = cfg.time_resolution();
        let scheme_at = |scenario: &Scenario, level_db: f64| -> Result<PilotScheme> {
            Ok(match tag {
                SchemeTag::Am => PilotScheme::Am(AmScheme::single(db_to_linear(level_db), res)?),
                SchemeTag::An => PilotScheme::An(AnScheme::from_seed(
                    db_to_linear(level_db),
                    self.an_seed,
                    scenario.config(),
                )?),
                SchemeTag::Clean => PilotScheme::Clean,
            })
        };
        match self.preset {
            Preset::Fig2 => base.with_scheme(PilotScheme::Am(AmScheme::with_decay(
                keys[1] as usize,
                keys[0],
                cfg.bandwidth(),
            )?)),
            Preset::Fig3 => {
                base.with_scheme(PilotScheme::Am(AmScheme::single(db_to_linear(keys[0]), keys[1] * res)?))
            }
            Preset::Fig4 => base.with_scheme(scheme_at(base, keys[0])?),
            Preset::Fig5a | Preset::Fig5b => {
                let scaled = base
                    .with_scheme(PilotScheme::Clean)?
                    .with_config(cfg.with_tx_power(dbm_to_watts(keys[0]))?)?;
                let scheme = scheme_at(&scaled, self.secondary[0])?;
                scaled.with_scheme(scheme)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowValues {
    pub crb_bob: Option<f64>,
    pub bias_eve: f64,
    pub mcrb_eve: f64,
    pub lb_eve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub keys: Vec<f64>,
    pub scheme: SchemeTag,
    pub an_seed: Option<u64>,
    pub outcome: std::result::Result<RowValues, String>,
}

impl SweepRow {
    pub fn values(&self) -> Option<&RowValues> {
        self.outcome.as_ref().ok()
    }
}

/// Evaluates every grid point and scheme. Grid points run in parallel; rows
/// come back in grid order, schemes in preset order within a point.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(Vec<f64>, SchemeTag)> = spec
        .grid()
        .into_iter()
        .flat_map(|k| spec.preset.schemes().iter().map(move |t| (k.clone(), *t)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(keys, tag)| {
            let outcome = spec
                .scenario_at(&keys, tag)
                .and_then(|sc| run_bounds(&sc, spec.b_mode))
                .map(|r| RowValues {
                    crb_bob: r.position.crb_legit_rmse,
                    bias_eve: r.position.bias_norm,
                    mcrb_eve: r.position.mcrb_rmse,
                    lb_eve: r.position.rmse_lb,
                })
                .map_err(|e| e.to_string());
            SweepRow {
                keys,
                scheme: tag,
                an_seed: (tag == SchemeTag::An).then_some(spec.an_seed),
                outcome,
            }
        })
        .collect())
}

const VALUE_NAMES: [&str; 4] = ["crb_bob", "bias_eve", "mcrb_eve", "lb_eve"];

pub fn csv_header(preset: Preset) -> Vec<String> {
    let mut h: Vec<String> = preset.key_names().iter().map(|s| s.to_string()).collect();
    for tag in preset.schemes() {
        h.extend(VALUE_NAMES.iter().map(|v| format!("{}_{v}", tag.as_str())));
    }
    if preset.schemes().contains(&SchemeTag::An) {
        h.push("an_seed".into());
    }
    h.push("error".into());
    h
}

fn fmt_value(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes rows from [`run_sweep`] as CSV, merging the schemes of one grid
/// point into one line.
pub fn write_csv<W: Write>(rows: &[SweepRow], preset: Preset, out: W) -> Result<()> {
    let schemes = preset.schemes();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(preset))?;
    for group in rows.chunks(schemes.len()) {
        if group.len() != schemes.len() || group.iter().zip(schemes).any(|(r, t)| r.scheme != *t) {
            return Err(Error::Validation("sweep rows are not grouped by grid point".into()));
        }
        let mut rec: Vec<String> = group[0].keys.iter().map(|k| k.to_string()).collect();
        let mut errors = Vec::new();
        for row in group {
            match &row.outcome {
                Ok(v) => {
                    rec.push(v.crb_bob.map(fmt_value).unwrap_or_default());
                    rec.extend([v.bias_eve, v.mcrb_eve, v.lb_eve].map(fmt_value));
                }
                Err(e) => {
                    rec.extend(std::iter::repeat_n(String::new(), VALUE_NAMES.len()));
                    errors.push(format!("{}: {e}", row.scheme.as_str()));
                }
            }
        }
        if schemes.contains(&SchemeTag::An) {
            rec.push(group.iter().find_map(|r| r.an_seed).map(|s| s.to_string()).unwrap_or_default());
        }
        rec.push(errors.join("; "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], preset: Preset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, preset, std::io::BufWriter::new(file))
}
