use serde::{Deserialize, Serialize};

use super::{CoalitionOutcome, DispatchSchedule, ScenarioDispatch};
use crate::error::{Error, Result};
use crate::model::CommunityModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ChargeAndDischarge,
    BuyAndSell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityViolation {
    pub building: usize,
    pub scenario: usize,
    pub period: usize,
    pub kind: ViolationKind,
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    /// Violations in the schedule as solved.
    pub violations: Vec<ComplementarityViolation>,
    /// Clean equivalent schedule, present only when there were violations.
    pub reconstructed: Option<DispatchSchedule>,
    /// Cost of the reconstructed schedule minus the solved value.
    pub objective_change: f64,
}

impl ComplementarityReport {
    /// True when the solved schedule needed no repair.
    pub fn is_tight(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(crate) fn find_violations(schedule: &DispatchSchedule, tol: f64) -> Vec<ComplementarityViolation> {
    let mut out = Vec::new();
    for (m, scenarios) in schedule.blocks.iter().enumerate() {
        for (w, d) in scenarios.iter().enumerate() {
            for t in 0..d.p_ch.len() {
                let checks = [
                    (ViolationKind::ChargeAndDischarge, d.p_ch[t] * d.p_dis[t]),
                    (ViolationKind::BuyAndSell, d.p_gplus[t] * d.p_gminus[t]),
                ];
                for (kind, product) in checks {
                    if product > tol {
                        out.push(ComplementarityViolation {
                            building: schedule.members[m],
                            scenario: w,
                            period: t,
                            kind,
                            product,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Replaces simultaneous charge and discharge with a single flow that leaves
/// the stored energy unchanged.
///
/// Returns `(p_ch, p_dis, relief)` where `relief >= 0` is the drop in the
/// battery's draw from the building bus.
pub fn reconstruct_step(p_ch: f64, p_dis: f64, eta_ch: f64, eta_dis: f64) -> (f64, f64, f64) {
    let stored = eta_ch * p_ch - p_dis / eta_dis;
    let (new_ch, new_dis) = if stored >= 0.0 { (stored / eta_ch, 0.0) } else { (0.0, -stored * eta_dis) };
    let relief = (p_ch - p_dis) - (new_ch - new_dis);
    (new_ch, new_dis, relief)
}

fn repair(d: &mut ScenarioDispatch, model: &CommunityModel, tol: f64) {
    let st = &model.storage;
    for t in 0..d.p_ch.len() {
        if d.p_ch[t] * d.p_dis[t] > tol {
            let (ch, dis, relief) = reconstruct_step(d.p_ch[t], d.p_dis[t], st.eta_ch, st.eta_dis);
            d.p_ch[t] = ch;
            d.p_dis[t] = dis;
            let from_buy = relief.min(d.p_gplus[t]);
            d.p_gplus[t] -= from_buy;
            d.p_gminus[t] += relief - from_buy;
        }
        let both = d.p_gplus[t].min(d.p_gminus[t]);
        if both > 0.0 && d.p_gplus[t] * d.p_gminus[t] > tol {
            d.p_gplus[t] -= both;
            d.p_gminus[t] -= both;
        }
    }
    let import_only = model.options.demand_charge_import_only;
    d.p_gmax = (0..d.p_gplus.len())
        .map(|t| if import_only { d.p_gplus[t] } else { d.p_gplus[t].max(d.p_gminus[t]) })
        .fold(0.0, f64::max);
}

/// Lists simultaneous charge/discharge and buy/sell in a solved schedule.
///
/// When any are found, builds the equivalent clean schedule and checks that it
/// costs the same (within `tol`, relative to the value for values above one)
/// and is itself clean. Failing either check is an internal error: it means
/// dropping the complementarity rows changed the optimum.
pub fn verify_complementarity(
    model: &CommunityModel,
    outcome: &CoalitionOutcome,
    tol: f64,
) -> Result<ComplementarityReport> {
    if outcome.model_fingerprint != model.fingerprint() {
        return Err(Error::ModelMismatch);
    }
    let violations = find_violations(&outcome.schedule, tol);
    if violations.is_empty() {
        return Ok(ComplementarityReport { violations, reconstructed: None, objective_change: 0.0 });
    }

    let mut schedule = outcome.schedule.clone();
    for scenarios in &mut schedule.blocks {
        for d in scenarios.iter_mut() {
            repair(d, model, tol);
        }
    }
    let cap = model.storage.p_g_max;
    let over_cap = schedule
        .blocks
        .iter()
        .flatten()
        .any(|d| d.p_gplus.iter().chain(&d.p_gminus).any(|&g| g > cap + tol));
    if over_cap {
        return Err(Error::Internal(format!(
            "coalition {}: repaired schedule exceeds the grid cap",
            outcome.coalition
        )));
    }
    let cost = outcome.capex + schedule.member_opex(model).iter().sum::<f64>();
    let objective_change = cost - outcome.value;
    if objective_change.abs() > tol * outcome.value.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "coalition {}: removing simultaneous flows changes the cost by {objective_change}",
            outcome.coalition
        )));
    }
    let residual = find_violations(&schedule, tol);
    if !residual.is_empty() {
        return Err(Error::Internal(format!(
            "coalition {}: {} simultaneous flows survive repair",
            outcome.coalition,
            residual.len()
        )));
    }
    Ok(ComplementarityReport { violations, reconstructed: Some(schedule), objective_change })
}
