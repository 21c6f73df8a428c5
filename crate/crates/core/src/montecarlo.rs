//! Monte-Carlo oracle: a matched-filter delay estimator that assumes the
//! public pilot, and a range-fit position estimator on top of it.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{eve_inputs, run_bounds};
use crate::delay::{search_window, TrigSum, GRID_POINTS_PER_RESOLUTION, REFINE_TOL_RESOLUTION};
use crate::error::{Error, Result};
use crate::numerics::{BoundingBox, LineSearchSpec};
use crate::position::{pseudo_true_position, BMode};
use crate::scenario::Scenario;
use crate::ser;
use crate::signal::{synthesize_rx_with, OfdmConfig, PilotScheme};

/// Summary of `n` Monte-Carlo trials of a vector estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub n_trials: usize,
    #[serde(serialize_with = "ser::vector")]
    pub truth: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub pseudo_true: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub empirical_mean: DVector<f64>,
    /// `empirical_mean - truth`.
    #[serde(serialize_with = "ser::vector")]
    pub empirical_bias: DVector<f64>,
    /// Unbiased per-component sample variance.
    #[serde(serialize_with = "ser::vector")]
    pub empirical_variance: DVector<f64>,
    /// `sample_std / sqrt(n)` per component.
    #[serde(serialize_with = "ser::vector")]
    pub standard_error: DVector<f64>,
    /// `sqrt(mean ||estimate - truth||^2)`.
    pub empirical_rmse: f64,
    pub rmse_lb: f64,
    /// `empirical_rmse / rmse_lb`.
    pub rmse_ratio: f64,
}

impl McReport {
    fn from_samples(samples: &[DVector<f64>], truth: DVector<f64>, pseudo_true: DVector<f64>, rmse_lb: f64) -> Self {
        let n = samples.len();
        let dim = truth.len();
        let mut mean = DVector::zeros(dim);
        for s in samples {
            mean += s;
        }
        mean /= n as f64;
        let mut var = DVector::zeros(dim);
        let mut sq_err = 0.0;
        for s in samples {
            var += (s - &mean).map(|d| d * d);
            sq_err += (s - &truth).norm_squared();
        }
        let var = if n > 1 { var / (n - 1) as f64 } else { var };
        let empirical_rmse = (sq_err / n as f64).sqrt();
        Self {
            n_trials: n,
            empirical_bias: &mean - &truth,
            standard_error: var.map(|v| (v / n as f64).sqrt()),
            empirical_variance: var,
            empirical_mean: mean,
            truth,
            pseudo_true,
            empirical_rmse,
            rmse_lb,
            rmse_ratio: empirical_rmse / rmse_lb,
        }
    }

    /// Largest `|mean_k - pseudo_true_k| / se_k` over components.
    pub fn max_z_score(&self) -> f64 {
        (&self.empirical_mean - &self.pseudo_true)
            .iter()
            .zip(self.standard_error.iter())
            .map(|(d, se)| d.abs() / se)
            .fold(0.0, f64::max)
    }
}

/// Matched-filter delay estimate: maximizer over `window` of
/// `Re sum_m conj(alpha sqrt(P_M) d_m(eta)) y_m`.
pub fn mle_delay(y: &[Complex64], cfg: &OfdmConfig, alpha: Complex64, window: &LineSearchSpec) -> f64 {
    let scale = alpha.conj() * cfg.per_subcarrier_power().sqrt();
    TrigSum::new(y, cfg.subcarrier_spacing(), scale).argmax_with(window)
}

/// Absolute delay window used by the estimator for an anchor at delay `tau`.
/// Matches the pseudo-true search window, widened to one resolution cell on
/// either side when that window is empty.
pub fn estimation_window(scheme: &PilotScheme, cfg: &OfdmConfig, tau: f64) -> Result<LineSearchSpec> {
    let res = cfg.time_resolution();
    let (lo, hi) = match search_window(scheme, cfg) {
        (lo, hi) if hi > lo => (lo, hi),
        _ => (-res, res),
    };
    LineSearchSpec::new(
        tau + lo,
        tau + hi,
        res / GRID_POINTS_PER_RESOLUTION,
        REFINE_TOL_RESOLUTION * res,
    )
}

/// Weighted range-fit position estimate from measured delays.
pub fn estimate_position(
    tau_hat: &DVector<f64>,
    anchors: &[DVector<f64>],
    variances: &DVector<f64>,
    c: f64,
    seed_box: &BoundingBox,
    reference: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    Ok(pseudo_true_position(anchors, tau_hat, variances, c, seed_box, reference)?.point)
}

/// Generator for `(trial, anchor)`: the master seed picks the key, the pair
/// picks the stream.
fn trial_rng(seed: u64, trial: usize, anchor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 20) | anchor as u64);
    rng
}

pub fn run_delay_trials(scenario: &Scenario, anchor_id: usize, n: usize, seed: u64) -> Result<McReport> {
    if n == 0 {
        return Err(Error::Validation("need at least one trial".into()));
    }
    let report = crate::delay::delay_report(scenario, anchor_id, scenario.true_delay(anchor_id)?)?;
    let cfg = scenario.config();
    let pilot = scenario.pilot()?;
    let alpha = scenario.channel_gain(anchor_id)?;
    let tau = report.tau_true;
    let window = estimation_window(scenario.scheme(), cfg, tau)?;
    let samples: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t, anchor_id);
            let y = synthesize_rx_with(&pilot, alpha, tau, cfg, &mut rng);
            DVector::from_element(1, mle_delay(&y, cfg, alpha, &window))
        })
        .collect();
    Ok(McReport::from_samples(
        &samples,
        DVector::from_element(1, tau),
        DVector::from_element(1, report.tau_pseudo),
        report.lb.sqrt(),
    ))
}

/// Position trials: every eavesdropper estimates its delay from independent
/// noise, then the delays are fused by the range fit. Mirror ambiguities of
/// the fit are resolved toward Alice's true position.
pub fn run_position_trials(scenario: &Scenario, n: usize, seed: u64, b_mode: BMode) -> Result<McReport> {
    if n == 0 {
        return Err(Error::Validation("need at least one trial".into()));
    }
    let bounds = run_bounds(scenario, b_mode)?;
    let (stage, eves, ids) = eve_inputs(scenario)?;
    let cfg = scenario.config();
    let c = scenario.speed_of_light();
    let alice = scenario.alice();
    let per_eve = ids
        .iter()
        .zip(eves.tau_true.iter())
        .map(|(&id, &tau)| Ok((id, scenario.channel_gain(id)?, tau, estimation_window(scenario.scheme(), cfg, tau)?)))
        .collect::<Result<Vec<_>>>()?;

    let samples = (0..n)
        .into_par_iter()
        .map(|t| {
            let tau_hat = DVector::from_iterator(
                per_eve.len(),
                per_eve.iter().map(|(id, alpha, tau, window)| {
                    let mut rng = trial_rng(seed, t, *id);
                    let y = synthesize_rx_with(stage.pilot(), *alpha, *tau, cfg, &mut rng);
                    mle_delay(&y, cfg, *alpha, window)
                }),
            );
            estimate_position(&tau_hat, &eves.anchors, eves.cov.true_cov(), c, scenario.seed_box(), Some(alice))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(McReport::from_samples(
        &samples,
        alice.clone(),
        bounds.position.pseudo_true.clone(),
        bounds.position.rmse_lb,
    ))
}
