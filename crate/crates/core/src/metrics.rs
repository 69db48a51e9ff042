//! Economic indicators comparing no storage, individual storage, shared storage, and pooled shared storage.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationResult, Method};
use crate::coalition::{evaluate_coalition, ies_outcome, no_storage_cost, CharacteristicCache};
use crate::error::{Error, Result};
use crate::model::{CommunityModel, SharingMode};

/// Operation savings per unit of storage capital cost. `None` when no capital was spent.
pub fn value_of_storage(opex_no_es: f64, opex: f64, capex: f64) -> Option<f64> {
    (capex > 0.0).then(|| (opex_no_es - opex) / capex)
}

/// Fraction of `baseline` saved. Negative when `total` exceeds the baseline. `None` for a zero baseline.
pub fn cost_reduction(baseline: f64, total: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (baseline - total) / baseline)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingRow {
    pub id: String,
    pub baseline_no_es: f64,
    /// Cost with its own optimally sized unit.
    pub ies_total: f64,
    /// Cost allocated from the shared unit.
    pub ces_total: f64,
    /// Allocated cost minus the building's bill under the shared schedule.
    pub ces_capex_share: f64,
    pub cost_reduction_ies: Option<f64>,
    pub cost_reduction_ces: Option<f64>,
    pub vos_ies: Option<f64>,
    pub vos_ces: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityRow {
    pub baseline_no_es: f64,
    pub ies_total: f64,
    pub ces_total: f64,
    pub ces_capex: f64,
    /// Grand coalition cost when stored energy is pooled.
    pub ces_share_total: Option<f64>,
    pub cost_reduction_ies: Option<f64>,
    pub cost_reduction_ces: Option<f64>,
    pub cost_reduction_share: Option<f64>,
    /// Aggregate over all individual units.
    pub vos_ies: Option<f64>,
    pub vos_ces: Option<f64>,
    pub vos_pooled: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EconomicReport {
    pub method: Method,
    pub sharing_mode: SharingMode,
    pub model_fingerprint: u64,
    pub buildings: Vec<BuildingRow>,
    pub community: CommunityRow,
}

const CSV_HEADER: [&str; 13] = [
    "id",
    "baseline_no_es",
    "ies_total",
    "ces_total",
    "ces_capex_share",
    "ces_share_total",
    "cost_reduction_ies",
    "cost_reduction_ces",
    "cost_reduction_share",
    "vos_ies",
    "vos_ces",
    "vos_pooled",
    "method",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

impl EconomicReport {
    /// Community costs in the order pooled ≤ shared ≤ individual ≤ none, each within `tol`.
    /// A missing pooled cost is skipped.
    pub fn dominance_holds(&self, tol: f64) -> bool {
        let c = &self.community;
        c.ces_share_total.is_none_or(|s| s <= c.ces_total + tol)
            && c.ces_total <= c.ies_total + tol
            && c.ies_total <= c.baseline_no_es + tol
    }

    /// `|Σ capex shares − grand capex|`.
    pub fn conservation_gap(&self) -> f64 {
        (self.buildings.iter().map(|b| b.ces_capex_share).sum::<f64>() - self.community.ces_capex).abs()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Internal(format!("writing report: {e}"));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        let method = self.method.to_string();
        for b in &self.buildings {
            w.write_record([
                b.id.clone(),
                b.baseline_no_es.to_string(),
                b.ies_total.to_string(),
                b.ces_total.to_string(),
                b.ces_capex_share.to_string(),
                "n/a".into(),
                cell(b.cost_reduction_ies),
                cell(b.cost_reduction_ces),
                "n/a".into(),
                cell(b.vos_ies),
                cell(b.vos_ces),
                "n/a".into(),
                method.clone(),
            ])
            .map_err(csv_err)?;
        }
        let c = &self.community;
        w.write_record([
            "community".to_string(),
            c.baseline_no_es.to_string(),
            c.ies_total.to_string(),
            c.ces_total.to_string(),
            c.ces_capex.to_string(),
            cell(c.ces_share_total),
            cell(c.cost_reduction_ies),
            cell(c.cost_reduction_ces),
            cell(c.cost_reduction_share),
            cell(c.vos_ies),
            cell(c.vos_ces),
            cell(c.vos_pooled),
            method,
        ])
        .map_err(csv_err)?;
        w.flush().map_err(|e| Error::Internal(format!("writing report: {e}")))
    }
}

/// Assembles the comparison report for one allocation of the grand coalition.
///
/// `pooled` carries the same community in pooled mode with its own cache; it
/// only feeds the community row. Building-level shared VoS is unavailable in
/// pooled mode, since stored energy cannot be attributed to one building.
pub fn build_report(
    model: &CommunityModel,
    cache: &CharacteristicCache,
    allocation: &AllocationResult,
    pooled: Option<(&CommunityModel, &CharacteristicCache)>,
) -> Result<EconomicReport> {
    let n = model.n_buildings();
    if cache.fingerprint() != model.fingerprint() {
        return Err(Error::ModelMismatch);
    }
    if allocation.allocation.len() != n {
        return Err(Error::ModelMismatch);
    }
    let grand = evaluate_coalition(model, &model.grand_coalition(), cache)?;
    let pooled_grand = match pooled {
        Some((pm, pc)) => {
            if pm.with_sharing_mode(SharingMode::Pooled).fingerprint() != pm.fingerprint()
                || pm.with_sharing_mode(model.sharing_mode()).fingerprint() != model.fingerprint()
            {
                return Err(Error::ModelMismatch);
            }
            Some(evaluate_coalition(pm, &pm.grand_coalition(), pc)?)
        }
        None => None,
    };

    let building_vos = model.sharing_mode() == SharingMode::PerBuilding;
    let mut buildings = Vec::with_capacity(n);
    let (mut ies_opex, mut ies_capex) = (0.0, 0.0);
    for i in 0..n {
        let baseline = no_storage_cost(model, i)?;
        let ies = ies_outcome(model, i, cache)?;
        ies_opex += ies.expected_opex;
        ies_capex += ies.capex;
        let ces_total = allocation.allocation[i];
        let opex = grand.opex_of(i).ok_or_else(|| Error::Internal(format!("building {i} missing from grand schedule")))?;
        let share = ces_total - opex;
        buildings.push(BuildingRow {
            id: model.buildings[i].id.clone(),
            baseline_no_es: baseline,
            ies_total: ies.value,
            ces_total,
            ces_capex_share: share,
            cost_reduction_ies: cost_reduction(baseline, ies.value),
            cost_reduction_ces: cost_reduction(baseline, ces_total),
            vos_ies: value_of_storage(baseline, ies.expected_opex, ies.capex),
            vos_ces: if building_vos { value_of_storage(baseline, opex, share) } else { None },
        });
    }

    let baseline: f64 = buildings.iter().map(|b| b.baseline_no_es).sum();
    let ies_total: f64 = buildings.iter().map(|b| b.ies_total).sum();
    let ces_total: f64 = buildings.iter().map(|b| b.ces_total).sum();
    let community = CommunityRow {
        baseline_no_es: baseline,
        ies_total,
        ces_total,
        ces_capex: grand.capex,
        ces_share_total: pooled_grand.as_ref().map(|p| p.value),
        cost_reduction_ies: cost_reduction(baseline, ies_total),
        cost_reduction_ces: cost_reduction(baseline, ces_total),
        cost_reduction_share: pooled_grand.as_ref().and_then(|p| cost_reduction(baseline, p.value)),
        vos_ies: value_of_storage(baseline, ies_opex, ies_capex),
        vos_ces: value_of_storage(baseline, grand.expected_opex, grand.capex),
        vos_pooled: pooled_grand.as_ref().and_then(|p| value_of_storage(baseline, p.expected_opex, p.capex)),
    };
    Ok(EconomicReport {
        method: allocation.method,
        sharing_mode: model.sharing_mode(),
        model_fingerprint: model.fingerprint(),
        buildings,
        community,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{nucleolus, proportional, shapley, CommunityGame, ProportionalOptions};
    use crate::coalition::tests::random_model;

    #[test]
    fn formulas_by_hand() {
        assert_eq!(value_of_storage(100.0, 80.0, 10.0), Some(2.0));
        assert_eq!(value_of_storage(100.0, 100.0, 10.0), Some(0.0));
        assert_eq!(value_of_storage(100.0, 80.0, 0.0), None);
        assert!((cost_reduction(100.0, 83.3).unwrap() - 0.167).abs() < 1e-12);
        assert_eq!(cost_reduction(5.0, 5.0), Some(0.0));
        assert!((cost_reduction(7.0, 9.0).unwrap() + 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(cost_reduction(0.0, 1.0), None);
    }

    #[test]
    fn report_invariants_on_random_communities() {
        for seed in 0..3 {
            let m = random_model(40 + seed, 3, 2, 6);
            let cache = CharacteristicCache::new(&m);
            let pm = m.with_sharing_mode(SharingMode::Pooled);
            let pc = CharacteristicCache::new(&pm);
            let game = CommunityGame::new(&m, &cache).unwrap();
            let allocs = [
                nucleolus(&game).unwrap(),
                shapley(&game, 20, false).unwrap(),
                proportional(&m, &cache, ProportionalOptions { equal_split_when_degenerate: true }).unwrap(),
            ];
            for a in &allocs {
                let r = build_report(&m, &cache, a, Some((&pm, &pc))).unwrap();
                assert!(r.dominance_holds(1e-6), "{:?}", r.community);
                assert!(r.conservation_gap() < 1e-6);
                let sum: f64 = r.buildings.iter().map(|b| b.baseline_no_es).sum();
                assert!((sum - r.community.baseline_no_es).abs() < 1e-9);
                for b in &r.buildings {
                    assert!(b.cost_reduction_ces.unwrap() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn pooled_model_hides_building_vos_and_rejects_mismatch() {
        let m = random_model(3, 2, 1, 4).with_sharing_mode(SharingMode::Pooled);
        let cache = CharacteristicCache::new(&m);
        let a = shapley(&CommunityGame::new(&m, &cache).unwrap(), 20, false).unwrap();
        let r = build_report(&m, &cache, &a, None).unwrap();
        assert!(r.buildings.iter().all(|b| b.vos_ces.is_none()));
        assert!(r.community.ces_share_total.is_none());

        let other = random_model(4, 2, 1, 4);
        let oc = CharacteristicCache::new(&other);
        assert!(matches!(build_report(&other, &cache, &a, None), Err(Error::ModelMismatch)));
        assert!(matches!(build_report(&m, &cache, &a, Some((&other, &oc))), Err(Error::ModelMismatch)));
    }

    #[test]
    fn csv_has_a_row_per_building_and_marks_missing_values() {
        let m = random_model(5, 2, 1, 4);
        let cache = CharacteristicCache::new(&m);
        let a = shapley(&CommunityGame::new(&m, &cache).unwrap(), 20, false).unwrap();
        let r = build_report(&m, &cache, &a, None).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("id,baseline_no_es"));
        assert!(lines[3].starts_with("community,") && lines[3].contains("n/a"));
    }
}
