//! OFDM pilot construction and the received-signal model.
//!
//! A receiver at delay `tau` observes, per subcarrier `m = 1..M`,
//!
//! ```text
//! y_m = alpha * exp(-j 2 pi m df tau) * s_m + n_m,    n_m ~ CN(0, N0 df)
//! ```
//!
//! where `s` is the transmitted pilot. The public pilot is the flat vector
//! `v = sqrt(P_M) * 1`; the manipulated pilots add delayed replicas (artificial
//! multipath) or a fixed noise-like perturbation (artificial noise) and are
//! renormalized so that `||s|| = sqrt(P)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance on `||z||` accepted by [`build_pilot_an`].
pub const PERTURBATION_NORM_TOL: f64 = 1e-9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// OFDM numerology and link budget shared by every formula.
///
/// The subcarrier spacing and per-subcarrier power are derived, so
/// `df = W / M` and `P_M = P / M` hold exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfdmConfig {
    num_subcarriers: usize,
    bandwidth: f64,
    carrier_freq: f64,
    tx_power: f64,
    noise_psd: f64,
    cp_duration: f64,
}

impl OfdmConfig {
    /// `cp_duration` defaults to `1 / (14 df)` when `None`.
    pub fn new(
        num_subcarriers: usize,
        bandwidth: f64,
        carrier_freq: f64,
        tx_power: f64,
        noise_psd: f64,
        cp_duration: Option<f64>,
    ) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::Validation("num_subcarriers must be >= 1".into()));
        }
        for (name, v) in [
            ("bandwidth", bandwidth),
            ("carrier_freq", carrier_freq),
            ("tx_power", tx_power),
            ("noise_psd", noise_psd),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive and finite")));
            }
        }
        let spacing = bandwidth / num_subcarriers as f64;
        let cp_duration = cp_duration.unwrap_or(1.0 / (14.0 * spacing));
        if !(cp_duration.is_finite() && cp_duration > 0.0) {
            return Err(Error::Validation("cp_duration must be positive and finite".into()));
        }
        Ok(Self {
            num_subcarriers,
            bandwidth,
            carrier_freq,
            tx_power,
            noise_psd,
            cp_duration,
        })
    }

    /// Same numerology at a different transmit power.
    pub fn with_tx_power(&self, tx_power: f64) -> Result<Self> {
        Self::new(
            self.num_subcarriers,
            self.bandwidth,
            self.carrier_freq,
            tx_power,
            self.noise_psd,
            Some(self.cp_duration),
        )
    }

    pub fn with_noise_psd(&self, noise_psd: f64) -> Result<Self> {
        Self::new(
            self.num_subcarriers,
            self.bandwidth,
            self.carrier_freq,
            self.tx_power,
            noise_psd,
            Some(self.cp_duration),
        )
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.num_subcarriers as f64
    }
    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }
    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }
    pub fn per_subcarrier_power(&self) -> f64 {
        self.tx_power / self.num_subcarriers as f64
    }
    pub fn noise_psd(&self) -> f64 {
        self.noise_psd
    }
    /// Per-subcarrier complex noise variance `N0 * df`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_psd * self.subcarrier_spacing()
    }
    pub fn cp_duration(&self) -> f64 {
        self.cp_duration
    }
    /// Delay resolution `1 / W`.
    pub fn time_resolution(&self) -> f64 {
        1.0 / self.bandwidth
    }
}

/// Artificial multipath: `L` delayed replicas with power ratios `beta_l`
/// relative to the direct component (`beta_0 = 1`, `delta_0 = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmScheme {
    gains: Vec<f64>,
    delays: Vec<f64>,
    decay_t: Option<f64>,
}

impl AmScheme {
    pub fn new(gains: Vec<f64>, delays: Vec<f64>) -> Result<Self> {
        if gains.len() != delays.len() {
            return Err(Error::Validation(format!(
                "AM scheme has {} gains but {} delays",
                gains.len(),
                delays.len()
            )));
        }
        if let Some(b) = gains.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::Validation(format!("AM gain {b} must be finite and >= 0")));
        }
        if let Some(d) = delays.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Validation(format!("AM delay {d} must be finite and >= 0")));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("AM delays must be strictly increasing".into()));
        }
        Ok(Self {
            gains,
            delays,
            decay_t: None,
        })
    }

    /// `L` paths with `beta_l = (l + 1)^t` and `delta_l = l / (L W)`, so the
    /// largest injected delay equals the time resolution.
    pub fn with_decay(num_paths: usize, decay_t: f64, bandwidth: f64) -> Result<Self> {
        let l_max = num_paths as f64;
        let gains = (1..=num_paths).map(|l| (l as f64 + 1.0).powf(decay_t)).collect();
        let delays = (1..=num_paths).map(|l| l as f64 / (l_max * bandwidth)).collect();
        let mut scheme = Self::new(gains, delays)?;
        scheme.decay_t = Some(decay_t);
        Ok(scheme)
    }

    /// One injected path (`L = 1`).
    pub fn single(gain: f64, delay: f64) -> Result<Self> {
        Self::new(vec![gain], vec![delay])
    }

    pub fn none() -> Self {
        Self {
            gains: Vec::new(),
            delays: Vec::new(),
            decay_t: None,
        }
    }

    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }
    pub fn decay_t(&self) -> Option<f64> {
        self.decay_t
    }
    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    /// `true` when no replica carries power.
    pub fn is_inert(&self) -> bool {
        self.gains.iter().all(|&b| b == 0.0)
    }

    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        match self.delays.iter().find(|&&d| d >= cfg.cp_duration()) {
            Some(&d) => Err(Error::DelayExceedsCp {
                delay: d,
                cp: cfg.cp_duration(),
            }),
            None => Ok(()),
        }
    }
}

/// Artificial noise: a fixed perturbation `z` scaled by `sqrt(strength)`.
///
/// `z` is normalized to `||z|| = sqrt(P)`, so its elements have the same
/// average power as the public pilot and `strength` is the AN-to-pilot power
/// ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnScheme {
    strength: f64,
    #[serde(skip)]
    perturbation: Vec<Complex64>,
    seed: u64,
}

impl AnScheme {
    /// Draws `z` i.i.d. standard complex normal from a ChaCha stream keyed by
    /// `seed`, then rescales it to `||z|| = sqrt(P)`.
    pub fn from_seed(strength: f64, seed: u64, cfg: &OfdmConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Complex64> = (0..cfg.num_subcarriers())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let norm = l2_norm(&raw);
        let scale = cfg.tx_power().sqrt() / norm;
        let perturbation = raw.into_iter().map(|z| z * scale).collect();
        Self::with_perturbation(strength, perturbation, seed)
    }

    pub fn with_perturbation(strength: f64, perturbation: Vec<Complex64>, seed: u64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::Validation(format!("AN strength {strength} must be finite and >= 0")));
        }
        Ok(Self {
            strength,
            perturbation,
            seed,
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
    pub fn perturbation(&self) -> &[Complex64] {
        &self.perturbation
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum SchemeTag {
    Clean,
    Am,
    An,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Clean => "clean",
            SchemeTag::Am => "am",
            SchemeTag::An => "an",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PilotScheme {
    Clean,
    Am(AmScheme),
    An(AnScheme),
}

impl PilotScheme {
    pub fn tag(&self) -> SchemeTag {
        match self {
            PilotScheme::Clean => SchemeTag::Clean,
            PilotScheme::Am(_) => SchemeTag::Am,
            PilotScheme::An(_) => SchemeTag::An,
        }
    }

    /// `true` when the transmitted pilot equals the public one.
    pub fn is_inert(&self) -> bool {
        match self {
            PilotScheme::Clean => true,
            PilotScheme::Am(am) => am.is_inert(),
            PilotScheme::An(an) => an.strength() == 0.0,
        }
    }

    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        match self {
            PilotScheme::Clean => Ok(()),
            PilotScheme::Am(am) => am.validate(cfg),
            PilotScheme::An(an) => check_perturbation(an, cfg),
        }
    }

    pub fn build_pilot(&self, cfg: &OfdmConfig) -> Result<Pilot> {
        match self {
            PilotScheme::Clean => Ok(clean_pilot(cfg)),
            PilotScheme::Am(am) => build_pilot_am(cfg, am),
            PilotScheme::An(an) => build_pilot_an(cfg, an),
        }
    }
}

/// A realized pilot `s` with its normalization factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    samples: Vec<Complex64>,
    norm_factor: f64,
    tag: SchemeTag,
}

impl Pilot {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }
    pub fn tag(&self) -> SchemeTag {
        self.tag
    }
    pub fn norm(&self) -> f64 {
        l2_norm(&self.samples)
    }
}

/// `[d(tau)]_m = exp(-j 2 pi m df tau)` for `m = 1..M`.
pub fn phase_vector(num_subcarriers: usize, spacing: f64, tau: f64) -> Vec<Complex64> {
    (1..=num_subcarriers)
        .map(|m| unit_phasor(-(m as f64 * spacing * tau)))
        .collect()
}

/// `exp(j 2 pi turns)`, with the argument reduced to `[-1/2, 1/2]` turns first.
pub(crate) fn unit_phasor(turns: f64) -> Complex64 {
    let r = turns - turns.round();
    let (s, c) = (2.0 * PI * r).sin_cos();
    Complex64::new(c, s)
}

pub fn clean_pilot(cfg: &OfdmConfig) -> Pilot {
    let amp = cfg.per_subcarrier_power().sqrt();
    Pilot {
        samples: vec![Complex64::new(amp, 0.0); cfg.num_subcarriers()],
        norm_factor: 1.0,
        tag: SchemeTag::Clean,
    }
}

pub fn build_pilot_am(cfg: &OfdmConfig, am: &AmScheme) -> Result<Pilot> {
    am.validate(cfg)?;
    if am.is_inert() {
        return Ok(Pilot {
            tag: SchemeTag::Am,
            ..clean_pilot(cfg)
        });
    }
    let m_count = cfg.num_subcarriers();
    let spacing = cfg.subcarrier_spacing();
    let mut shape = vec![Complex64::new(1.0, 0.0); m_count];
    for (&beta, &delta) in am.gains().iter().zip(am.delays()) {
        let amp = beta.sqrt();
        for (m, u) in shape.iter_mut().enumerate() {
            *u += unit_phasor(-((m + 1) as f64 * spacing * delta)) * amp;
        }
    }
    Ok(normalize(cfg, shape, SchemeTag::Am))
}

pub fn build_pilot_an(cfg: &OfdmConfig, an: &AnScheme) -> Result<Pilot> {
    check_perturbation(an, cfg)?;
    if an.strength() == 0.0 {
        return Ok(Pilot {
            tag: SchemeTag::An,
            ..clean_pilot(cfg)
        });
    }
    // Work in units of sqrt(P_M): s = gamma * sqrt(P_M) * (1 + sqrt(strength) * z / sqrt(P_M)).
    let unit = cfg.per_subcarrier_power().sqrt();
    let amp = an.strength().sqrt() / unit;
    let shape = an
        .perturbation()
        .iter()
        .map(|z| Complex64::new(1.0, 0.0) + z * amp)
        .collect();
    Ok(normalize(cfg, shape, SchemeTag::An))
}

fn check_perturbation(an: &AnScheme, cfg: &OfdmConfig) -> Result<()> {
    let expected = cfg.tx_power().sqrt();
    if an.perturbation().len() != cfg.num_subcarriers() {
        return Err(Error::Validation(format!(
            "AN perturbation has length {} but the configuration has {} subcarriers",
            an.perturbation().len(),
            cfg.num_subcarriers()
        )));
    }
    let actual = l2_norm(an.perturbation());
    if !((actual - expected).abs() <= PERTURBATION_NORM_TOL * expected) {
        return Err(Error::BadPerturbationNorm { expected, actual });
    }
    Ok(())
}

/// Scales the pilot shape `u` (in units of `sqrt(P_M)`) to `||s|| = sqrt(P)`.
fn normalize(cfg: &OfdmConfig, shape: Vec<Complex64>, tag: SchemeTag) -> Pilot {
    let unit = cfg.per_subcarrier_power().sqrt();
    let gamma = cfg.tx_power().sqrt() / (unit * l2_norm(&shape));
    let samples = shape.into_iter().map(|u| u * (gamma * unit)).collect();
    Pilot {
        samples,
        norm_factor: gamma,
        tag,
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// Amplitude `lambda / (4 pi d)`, zero phase.
    FreeSpace,
    Fixed(Complex64),
}

pub fn pathloss_gain(distance: f64, carrier_freq: f64, model: GainModel, speed_of_light: f64) -> Result<Complex64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(match model {
        GainModel::FreeSpace => Complex64::new(speed_of_light / (4.0 * PI * carrier_freq * distance), 0.0),
        GainModel::Fixed(alpha) => alpha,
    })
}

/// `y = alpha * d(tau) ⊙ s + n` with noise drawn from a ChaCha stream keyed by `seed`.
pub fn synthesize_rx(pilot: &Pilot, alpha: Complex64, tau: f64, cfg: &OfdmConfig, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_rx_with(pilot, alpha, tau, cfg, &mut rng)
}

pub fn synthesize_rx_with<R: Rng + ?Sized>(
    pilot: &Pilot,
    alpha: Complex64,
    tau: f64,
    cfg: &OfdmConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    let sigma = (cfg.noise_variance() / 2.0).sqrt();
    noise_free_rx(pilot, alpha, tau, cfg)
        .into_iter()
        .map(|q| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            q + Complex64::new(re, im) * sigma
        })
        .collect()
}

pub fn noise_free_rx(pilot: &Pilot, alpha: Complex64, tau: f64, cfg: &OfdmConfig) -> Vec<Complex64> {
    let d = phase_vector(cfg.num_subcarriers(), cfg.subcarrier_spacing(), tau);
    d.iter().zip(pilot.samples()).map(|(d, s)| alpha * d * s).collect()
}
