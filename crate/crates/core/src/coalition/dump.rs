use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CoalitionOutcome;
use crate::error::{Error, Result};
use crate::model::CommunityModel;

/// Compact JSON view of an outcome, without the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub coalition: String,
    pub members: Vec<String>,
    pub value: f64,
    #[serde(rename = "E")]
    pub energy_capacity: f64,
    #[serde(rename = "P")]
    pub power_capacity: f64,
    pub capex: f64,
    pub opex: f64,
}

impl OutcomeSummary {
    pub fn new(model: &CommunityModel, outcome: &CoalitionOutcome) -> Self {
        Self {
            coalition: outcome.coalition.to_hex(),
            members: outcome.schedule.members.iter().map(|&i| model.buildings[i].id.clone()).collect(),
            value: outcome.value,
            energy_capacity: outcome.energy_capacity,
            power_capacity: outcome.power_capacity,
            capex: outcome.capex,
            opex: outcome.expected_opex,
        }
    }
}

/// One row per (building, scenario, period).
pub fn write_schedule_csv<W: Write>(model: &CommunityModel, outcome: &CoalitionOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Internal(format!("writing schedule: {e}"));
    w.write_record(["building_id", "scenario_id", "period", "p_ch", "p_dis", "e_b", "p_gplus", "p_gminus"])
        .map_err(csv_err)?;
    for (m, scenarios) in outcome.schedule.blocks.iter().enumerate() {
        let id = &model.buildings[outcome.schedule.members[m]].id;
        for (sid, d) in model.scenarios.ids.iter().zip(scenarios) {
            for t in 0..d.p_ch.len() {
                w.write_record([
                    id.clone(),
                    sid.clone(),
                    t.to_string(),
                    d.p_ch[t].to_string(),
                    d.p_dis[t].to_string(),
                    d.e_b[t].to_string(),
                    d.p_gplus[t].to_string(),
                    d.p_gminus[t].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Internal(format!("writing schedule: {e}")))?;
    Ok(())
}
