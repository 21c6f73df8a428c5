//! Delay-domain analysis: pseudo-true delays and the CRB/MCRB/LB of a
//! receiver that correlates against the public pilot.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{maximize_scalar, LineSearchSpec};
use crate::scenario::{Role, Scenario};
use crate::signal::{OfdmConfig, Pilot, PilotScheme};

/// Coarse grid points per `1 / W` in every delay search.
pub const GRID_POINTS_PER_RESOLUTION: f64 = 20.0;
/// Golden-section stopping width, in units of `1 / W`.
pub const REFINE_TOL_RESOLUTION: f64 = 1e-6;

/// `g(x) = Re sum_m c_m exp(j w_m x)` with `w_m = 2 pi m df`.
///
/// Both the pseudo-true objective (`c_m = s_m`) and the matched-filter
/// statistic (`c_m = conj(alpha) y_m`) have this form.
#[derive(Debug, Clone)]
pub(crate) struct TrigSum<'a> {
    coeffs: &'a [Complex64],
    spacing: f64,
    scale: Complex64,
}

impl<'a> TrigSum<'a> {
    pub(crate) fn new(coeffs: &'a [Complex64], spacing: f64, scale: Complex64) -> Self {
        Self { coeffs, spacing, scale }
    }

    fn rotor(&self, x: f64) -> Complex64 {
        let turns = self.spacing * x;
        let r = turns - turns.round();
        Complex64::from_polar(1.0, 2.0 * PI * r)
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        let w = self.rotor(x);
        let mut p = w;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs {
            acc += c * p;
            p *= w;
        }
        (self.scale * acc).re
    }

    /// `(g, g', g'')` at `x`.
    pub(crate) fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        let w = self.rotor(x);
        let mut p = w;
        let (mut s0, mut s1, mut s2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (k, c) in self.coeffs.iter().enumerate() {
            let m = (k + 1) as f64;
            let t = c * p;
            s0 += t;
            s1 += t * m;
            s2 += t * (m * m);
            p *= w;
        }
        let om = 2.0 * PI * self.spacing;
        let j = Complex64::new(0.0, 1.0);
        (
            (self.scale * s0).re,
            (self.scale * s1 * j * om).re,
            -(self.scale * s2).re * om * om,
        )
    }

    /// Global maximizer on `[lo, hi]`: grid scan, golden refinement, then a
    /// guarded Newton polish that stays inside the refined lobe.
    pub(crate) fn argmax(&self, lo: f64, hi: f64, resolution: f64) -> Result<f64> {
        let step = resolution / GRID_POINTS_PER_RESOLUTION;
        let spec = LineSearchSpec::new(lo, hi, step, REFINE_TOL_RESOLUTION * resolution)?;
        Ok(self.argmax_with(&spec))
    }

    pub(crate) fn argmax_with(&self, spec: &LineSearchSpec) -> f64 {
        let (x0, _) = maximize_scalar(|x| self.value(x), spec);
        self.polish(x0, spec.lo(), spec.hi(), spec.coarse_step())
    }

    fn polish(&self, x0: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let mut x = x0;
        let mut fx = self.value(x);
        for _ in 0..50 {
            let (_, d1, d2) = self.derivatives(x);
            if !(d2 < 0.0) {
                break;
            }
            let raw = x - d1 / d2;
            if (raw - x).abs() > step {
                break;
            }
            let nx = raw.clamp(lo, hi);
            if nx == x {
                break;
            }
            let fn_ = self.value(nx);
            if fn_ < fx - 1e-13 * fx.abs() {
                break;
            }
            let tiny = (nx - x).abs() <= 4.0 * f64::EPSILON * nx.abs().max(step);
            x = nx;
            fx = fn_;
            if tiny {
                break;
            }
        }
        x
    }
}

/// Offsets `(lo, hi)` relative to the true delay that bound the pseudo-true
/// delay search.
///
/// Multipath replicas only arrive late, so the AM window starts at the true
/// delay and extends one resolution cell past the last replica. The AN
/// perturbation can move the correlation peak either way, anywhere inside the
/// cyclic prefix.
pub fn search_window(scheme: &PilotScheme, cfg: &OfdmConfig) -> (f64, f64) {
    let res = cfg.time_resolution();
    match scheme {
        PilotScheme::Clean => (0.0, 0.0),
        PilotScheme::Am(am) => (0.0, am.max_delay().max(res) + res),
        PilotScheme::An(_) => (-cfg.cp_duration(), cfg.cp_duration()),
    }
}

/// Pseudo-true offset `tau0 - tau` for a realized pilot. It does not depend
/// on `tau`.
pub fn pseudo_true_offset(scheme: &PilotScheme, pilot: &Pilot, cfg: &OfdmConfig) -> Result<f64> {
    if scheme.is_inert() {
        return Ok(0.0);
    }
    let (lo, hi) = search_window(scheme, cfg);
    let one = Complex64::new(1.0, 0.0);
    TrigSum::new(pilot.samples(), cfg.subcarrier_spacing(), one).argmax(lo, hi, cfg.time_resolution())
}

/// Maximizer of `eta -> Re <alpha sqrt(P_M) d(eta), alpha d(tau) ⊙ s>` over the
/// scheme's search window.
pub fn pseudo_true_delay(scheme: &PilotScheme, cfg: &OfdmConfig, tau: f64) -> Result<f64> {
    let pilot = scheme.build_pilot(cfg)?;
    Ok(tau + pseudo_true_offset(scheme, &pilot, cfg)?)
}

/// `xi = sum_m m conj(u_m) exp(j w_m (tau - tau0))` where `u = s / (gamma sqrt(P_M))`
/// is the unnormalized pilot shape.
pub fn xi(pilot: &Pilot, cfg: &OfdmConfig, tau: f64, tau0: f64) -> Complex64 {
    let unit = pilot.norm_factor() * cfg.per_subcarrier_power().sqrt();
    let turns = cfg.subcarrier_spacing() * (tau - tau0);
    pilot
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let m = (k + 1) as f64;
            (s / unit).conj() * crate::signal::unit_phasor(m * turns) * m
        })
        .sum()
}

/// Delay-domain generalized Fisher quantities of the mismatched model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralizedFimScalar {
    /// Expected curvature of the log-likelihood; negative at a strict maximum.
    pub a: f64,
    /// Expected squared score; nonnegative.
    pub b: f64,
}

impl GeneralizedFimScalar {
    pub fn mcrb(&self) -> Result<f64> {
        if !(self.a.abs() >= 1e-300) {
            return Err(Error::DegenerateCurvature(self.a.abs()));
        }
        Ok(self.b / (self.a * self.a))
    }
}

/// Residual `eps = q_T(tau) - mu(tau0)` and derivatives of `mu`, all rotated
/// by `exp(j w_m tau0)` (inner products are unchanged).
struct MismatchTerms {
    eps: Vec<Complex64>,
    mu: Vec<Complex64>,
    omega: Vec<f64>,
}

impl MismatchTerms {
    fn new(pilot: &Pilot, cfg: &OfdmConfig, alpha: Complex64, tau: f64, tau0: f64) -> Self {
        let amp = cfg.per_subcarrier_power().sqrt();
        let turns = cfg.subcarrier_spacing() * (tau - tau0);
        let mut eps = Vec::with_capacity(pilot.samples().len());
        let mut mu = Vec::with_capacity(pilot.samples().len());
        let mut omega = Vec::with_capacity(pilot.samples().len());
        for (k, s) in pilot.samples().iter().enumerate() {
            let m = (k + 1) as f64;
            let model = alpha * amp;
            eps.push(alpha * crate::signal::unit_phasor(-m * turns) * s - model);
            mu.push(model);
            omega.push(2.0 * PI * m * cfg.subcarrier_spacing());
        }
        Self { eps, mu, omega }
    }

    fn gfim(&self, noise_var: f64) -> GeneralizedFimScalar {
        // mu' = -j w mu, mu'' = -w^2 mu
        let j = Complex64::new(0.0, 1.0);
        let mut curv = 0.0;
        let mut fisher = 0.0;
        let mut score = 0.0;
        for ((e, m), w) in self.eps.iter().zip(&self.mu).zip(&self.omega) {
            let d1 = -j * w * m;
            let d2 = -(w * w) * m;
            curv += (d2.conj() * e).re;
            fisher += d1.norm_sqr();
            score += (e.conj() * d1).re;
        }
        GeneralizedFimScalar {
            a: 2.0 * (curv - fisher) / noise_var,
            b: 4.0 * (score / noise_var).powi(2) + 2.0 * fisher / noise_var,
        }
    }

    /// `|Re[eps^H mu']|` together with `||mu'||` and `||eps||`.
    fn stationarity(&self) -> (f64, f64, f64) {
        let j = Complex64::new(0.0, 1.0);
        let mut score = 0.0;
        let mut dn = 0.0;
        let mut en = 0.0;
        for ((e, m), w) in self.eps.iter().zip(&self.mu).zip(&self.omega) {
            let d1 = -j * w * m;
            score += (e.conj() * d1).re;
            dn += d1.norm_sqr();
            en += e.norm_sqr();
        }
        (score.abs(), dn.sqrt(), en.sqrt())
    }
}

pub fn delay_gfim(pilot: &Pilot, cfg: &OfdmConfig, alpha: Complex64, tau: f64, tau0: f64) -> GeneralizedFimScalar {
    MismatchTerms::new(pilot, cfg, alpha, tau, tau0).gfim(cfg.noise_variance())
}

/// `B / A^2` of the mismatched delay model.
pub fn mcrb_delay_numeric(pilot: &Pilot, cfg: &OfdmConfig, alpha: Complex64, tau: f64, tau0: f64) -> Result<f64> {
    delay_gfim(pilot, cfg, alpha, tau, tau0).mcrb()
}

/// First-order optimality residual at `tau0`: returns
/// `(|Re[eps^H mu']|, ||mu'||, ||eps||)`.
pub fn stationarity_residual(pilot: &Pilot, cfg: &OfdmConfig, alpha: Complex64, tau: f64, tau0: f64) -> (f64, f64, f64) {
    MismatchTerms::new(pilot, cfg, alpha, tau, tau0).stationarity()
}

/// Printed closed form of the delay MCRB in terms of `xi`. Kept as a
/// cross-check of [`mcrb_delay_numeric`].
pub fn mcrb_delay_closed(pilot: &Pilot, cfg: &OfdmConfig, alpha: Complex64, tau: f64, tau0: f64) -> Result<f64> {
    let xi = xi(pilot, cfg, tau, tau0);
    let m = cfg.num_subcarriers() as f64;
    let df = cfg.subcarrier_spacing();
    let p = cfg.tx_power();
    let a = alpha.norm();
    let g = pilot.norm_factor();
    let num = (6.0 * a * p * g * xi.im).powi(2) + 3.0 * m * m * (m + 1.0) * (2.0 * m + 1.0) * cfg.noise_psd() * df * p;
    let den = 12.0 * PI * df * m.powf(-0.5) * a * p.powf(1.5) * g * xi.re
        - 6.0 * PI * m.sqrt() * (m + 1.0) * df * a * p.powf(1.5)
        + 2.0 * PI * m * (m + 1.0) * (2.0 * m + 1.0) * df * a * p;
    let den = den * den;
    if !(den >= 1e-300) {
        return Err(Error::DegenerateCurvature(den));
    }
    Ok(num / den)
}

/// Delay CRB with the public pilot.
pub fn crb_delay(cfg: &OfdmConfig, alpha: Complex64) -> f64 {
    let m = cfg.num_subcarriers() as f64;
    3.0 * cfg.noise_psd()
        / (4.0 * PI * PI * cfg.subcarrier_spacing() * (m + 1.0) * (2.0 * m + 1.0) * alpha.norm_sqr() * cfg.tx_power())
}

/// Delay CRB of a receiver that knows the transmitted pilot.
pub fn crb_delay_pilot(cfg: &OfdmConfig, pilot: &Pilot, alpha: Complex64) -> f64 {
    let df = cfg.subcarrier_spacing();
    let energy: f64 = pilot
        .samples()
        .iter()
        .enumerate()
        .map(|(k, s)| s.norm_sqr() * (2.0 * PI * (k + 1) as f64 * df).powi(2))
        .sum();
    cfg.noise_variance() / (2.0 * alpha.norm_sqr() * energy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayMismatchReport {
    pub anchor_id: usize,
    pub role: Role,
    pub tau_true: f64,
    pub tau_pseudo: f64,
    pub bias: f64,
    pub crb: f64,
    pub mcrb: f64,
    pub lb: f64,
    pub bias_m: f64,
    pub crb_m2: f64,
    pub mcrb_m2: f64,
    pub lb_m2: f64,
}

impl DelayMismatchReport {
    fn new(anchor_id: usize, role: Role, tau_true: f64, tau_pseudo: f64, crb: f64, mcrb: f64, c: f64) -> Self {
        let bias = tau_pseudo - tau_true;
        let lb = mcrb + bias * bias;
        Self {
            anchor_id,
            role,
            tau_true,
            tau_pseudo,
            bias,
            crb,
            mcrb,
            lb,
            bias_m: bias * c,
            crb_m2: crb * c * c,
            mcrb_m2: mcrb * c * c,
            lb_m2: lb * c * c,
        }
    }
}

/// Per-scenario delay-stage state: the realized pilot and its pseudo-true
/// offset, shared by every anchor.
#[derive(Debug, Clone)]
pub struct DelayStage {
    pilot: Pilot,
    offset: f64,
}

impl DelayStage {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let pilot = scenario.pilot()?;
        let offset = pseudo_true_offset(scenario.scheme(), &pilot, scenario.config())?;
        Ok(Self { pilot, offset })
    }

    pub fn pilot(&self) -> &Pilot {
        &self.pilot
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn report(&self, scenario: &Scenario, anchor_id: usize, tau: f64) -> Result<DelayMismatchReport> {
        let anchor = scenario.anchor(anchor_id)?;
        let alpha = scenario.channel_gain(anchor_id)?;
        let cfg = scenario.config();
        let c = scenario.speed_of_light();
        if anchor.role == Role::Legit {
            let crb = crb_delay_pilot(cfg, &self.pilot, alpha);
            return Ok(DelayMismatchReport::new(anchor_id, anchor.role, tau, tau, crb, crb, c));
        }
        let tau0 = tau + self.offset;
        let crb = crb_delay(cfg, alpha);
        let mcrb = mcrb_delay_numeric(&self.pilot, cfg, alpha, tau, tau0)?;
        Ok(DelayMismatchReport::new(anchor_id, anchor.role, tau, tau0, crb, mcrb, c))
    }
}

/// Delay report for one anchor at delay `tau`.
pub fn delay_report(scenario: &Scenario, anchor_id: usize, tau: f64) -> Result<DelayMismatchReport> {
    DelayStage::new(scenario)?.report(scenario, anchor_id, tau)
}
