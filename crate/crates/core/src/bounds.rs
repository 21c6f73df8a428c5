//! The two-stage pipeline for a whole scenario: per-anchor delay bounds,
//! then the eavesdroppers' position bounds and the legitimate position CRB.

use nalgebra::DVector;
use serde::Serialize;

use crate::delay::{DelayMismatchReport, DelayStage};
use crate::error::{Error, Result};
use crate::position::{
    crb_position, generalized_fims, lb_position, mcrb_position, pseudo_true_position, BMode, DelayCovariances,
    PositionBoundReport,
};
use crate::scenario::Scenario;
use crate::ser;
use crate::signal::SchemeTag;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub scheme: SchemeTag,
    pub b_mode: BMode,
    pub delays: Vec<DelayMismatchReport>,
    pub position: PositionBoundReport,
    /// Best competing minimum of the position fit, if the fit is ambiguous.
    #[serde(serialize_with = "ser::opt_vector")]
    pub alternate_pseudo_true: Option<DVector<f64>>,
}

impl BoundsReport {
    pub fn eve_delays(&self) -> impl Iterator<Item = &DelayMismatchReport> {
        self.delays.iter().filter(|r| r.role == crate::scenario::Role::Eve)
    }
}

/// Eavesdropper inputs to the position stage.
#[derive(Debug, Clone)]
pub struct EveDelays {
    pub anchors: Vec<DVector<f64>>,
    pub tau_true: DVector<f64>,
    pub tau_pseudo: DVector<f64>,
    pub cov: DelayCovariances,
}

impl EveDelays {
    fn collect(scenario: &Scenario, reports: &[DelayMismatchReport]) -> Result<Self> {
        let eves: Vec<&DelayMismatchReport> = reports.iter().filter(|r| r.role == crate::scenario::Role::Eve).collect();
        if eves.len() < scenario.dim() {
            return Err(Error::Validation(format!(
                "position bounds need at least {} eavesdroppers, found {}",
                scenario.dim(),
                eves.len()
            )));
        }
        let anchors = eves
            .iter()
            .map(|r| scenario.anchor(r.anchor_id).map(|a| a.position.clone()))
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&DelayMismatchReport) -> f64| DVector::from_iterator(eves.len(), eves.iter().map(|r| f(r)));
        Ok(Self {
            anchors,
            tau_true: col(|r| r.tau_true),
            tau_pseudo: col(|r| r.tau_pseudo),
            cov: DelayCovariances::new(col(|r| r.mcrb), col(|r| r.crb))?,
        })
    }
}

/// Delay reports for every anchor, eavesdroppers first in anchor order.
pub fn delay_reports(scenario: &Scenario) -> Result<(DelayStage, Vec<DelayMismatchReport>)> {
    let stage = DelayStage::new(scenario)?;
    let reports = (0..scenario.anchors().len())
        .map(|i| stage.report(scenario, i, scenario.true_delay(i)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((stage, reports))
}

pub fn run_bounds(scenario: &Scenario, b_mode: BMode) -> Result<BoundsReport> {
    let (_, delays) = delay_reports(scenario)?;
    let eves = EveDelays::collect(scenario, &delays)?;
    let c = scenario.speed_of_light();
    let alice = scenario.alice();

    let fit = pseudo_true_position(
        &eves.anchors,
        &eves.tau_pseudo,
        eves.cov.true_cov(),
        c,
        scenario.seed_box(),
        Some(alice),
    )?;
    let residual_at = match b_mode {
        BMode::PaperLiteral => alice,
        BMode::TrueCovariance => &fit.point,
    };
    let gf = generalized_fims(&fit.point, &eves.anchors, &eves.tau_pseudo, residual_at, &eves.cov, b_mode, c)?;
    let mcrb = mcrb_position(&gf)?;
    let mut position = lb_position(alice, &fit.point, &mcrb);
    position.crb_legit_rmse = legit_crb_rmse(scenario, &delays)?;

    Ok(BoundsReport {
        scheme: scenario.scheme().tag(),
        b_mode,
        delays,
        position,
        alternate_pseudo_true: fit.alternate,
    })
}

/// Position CRB of the legitimate anchors, `None` when there are too few.
fn legit_crb_rmse(scenario: &Scenario, reports: &[DelayMismatchReport]) -> Result<Option<f64>> {
    let legit: Vec<&DelayMismatchReport> = reports.iter().filter(|r| r.role == crate::scenario::Role::Legit).collect();
    if legit.len() < scenario.dim() {
        return Ok(None);
    }
    let anchors = legit
        .iter()
        .map(|r| scenario.anchor(r.anchor_id).map(|a| a.position.clone()))
        .collect::<Result<Vec<_>>>()?;
    let var = DVector::from_iterator(legit.len(), legit.iter().map(|r| r.crb));
    let crb = crb_position(scenario.alice(), &anchors, &var, scenario.speed_of_light())?;
    Ok(Some(crb.trace().sqrt()))
}

/// Classical position CRB of the eavesdroppers with the public pilot.
pub fn eve_clean_crb_rmse(scenario: &Scenario) -> Result<f64> {
    let eve_ids = scenario.eve_ids();
    let anchors: Vec<DVector<f64>> = eve_ids.iter().map(|&i| scenario.anchors()[i].position.clone()).collect();
    let var = eve_ids
        .iter()
        .map(|&i| Ok(crate::delay::crb_delay(scenario.config(), scenario.channel_gain(i)?)))
        .collect::<Result<Vec<f64>>>()?;
    let crb = crb_position(scenario.alice(), &anchors, &DVector::from_vec(var), scenario.speed_of_light())?;
    Ok(crb.trace().sqrt())
}

pub(crate) fn eve_inputs(scenario: &Scenario) -> Result<(DelayStage, EveDelays, Vec<usize>)> {
    let (stage, delays) = delay_reports(scenario)?;
    let ids = delays
        .iter()
        .filter(|r| r.role == crate::scenario::Role::Eve)
        .map(|r| r.anchor_id)
        .collect();
    Ok((stage, EveDelays::collect(scenario, &delays)?, ids))
}
