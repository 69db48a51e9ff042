//! Coalition values: the joint sizing-and-dispatch LP, its cache, and no-storage baselines.

mod complementarity;
mod dump;

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoalitionKey, CommunityModel, SharingMode};
use crate::solver::{solve_lp, LinearProgram, LpStatus, MixedIntegerProgram, Relation};

pub use complementarity::{
    reconstruct_step, verify_complementarity, ComplementarityReport, ComplementarityViolation, ViolationKind,
};
pub use dump::{write_schedule_csv, OutcomeSummary};

/// Position of a per-period quantity inside a building's dispatch block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Charge = 0,
    Discharge = 1,
    Stored = 2,
    Buy = 3,
    Sell = 4,
}

const SLOTS: usize = 5;

/// Column layout of the sizing LP.
///
/// Columns are `E`, `P`, then one block per (member, scenario): the peak
/// grid exchange followed by five columns per period in [`Slot`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub members: Vec<usize>,
    pub scenarios: usize,
    pub periods: usize,
}

impl Layout {
    pub const ENERGY: usize = 0;
    pub const POWER: usize = 1;

    fn block_len(&self) -> usize {
        1 + SLOTS * self.periods
    }

    /// Peak grid exchange of member `m` (position in `members`) in scenario `w`.
    pub fn peak(&self, m: usize, w: usize) -> usize {
        2 + (m * self.scenarios + w) * self.block_len()
    }

    pub fn var(&self, m: usize, w: usize, t: usize, slot: Slot) -> usize {
        self.peak(m, w) + 1 + SLOTS * t + slot as usize
    }

    pub fn num_vars(&self) -> usize {
        2 + self.members.len() * self.scenarios * self.block_len()
    }
}

/// Builds the LP (or, with `switched`, the MILP body used by violation search).
///
/// When switched, every building of the community is present and gets a
/// binary `s_i`: its net load enters the balance as `(d - r) s_i`, and its
/// peak and battery flows are forced to zero when `s_i = 0`. The binaries are
/// returned with zero cost.
pub(crate) fn build_program(
    model: &CommunityModel,
    members: &[usize],
    switched: bool,
) -> (MixedIntegerProgram, Layout, Vec<usize>) {
    let layout = Layout { members: members.to_vec(), scenarios: model.n_scenarios(), periods: model.n_periods() };
    let st = &model.storage;
    let tariff = &model.tariff;
    let dt = model.scenarios.period_hours;
    let pooled = model.sharing_mode() == SharingMode::Pooled;
    let import_only = model.options.demand_charge_import_only;

    let mut lp = LinearProgram::new();
    lp.add_var(st.k_e, 0.0, f64::INFINITY);
    lp.add_var(st.k_p, 0.0, f64::INFINITY);
    // Pooled storage lets one building's level go negative. The recursion
    // already caps how far, and stating it keeps every column boxed.
    let e_lower = |t: usize| if pooled { -dt * (t + 1) as f64 * st.p_dis_max / st.eta_dis } else { 0.0 };
    for _ in members {
        for &rho in &model.scenarios.probabilities {
            lp.add_var(rho * tariff.demand_charge, 0.0, st.p_g_max);
            for t in 0..layout.periods {
                lp.add_var(0.0, 0.0, st.p_ch_max);
                lp.add_var(0.0, 0.0, st.p_dis_max);
                lp.add_var(0.0, e_lower(t), f64::INFINITY);
                lp.add_var(rho * tariff.purchase[t] * dt, 0.0, st.p_g_max);
                lp.add_var(-rho * tariff.sell[t] * dt, 0.0, st.p_g_max);
            }
        }
    }
    debug_assert_eq!(lp.num_vars(), layout.num_vars());
    if model.options.periodic_soc {
        let last = layout.periods - 1;
        for m in 0..members.len() {
            for w in 0..layout.scenarios {
                let v = layout.var(m, w, last, Slot::Stored);
                lp.set_bounds(v, 0.0, 0.0);
            }
        }
    }

    let mut mip = MixedIntegerProgram::new(lp);
    let switches: Vec<usize> = if switched { members.iter().map(|_| mip.add_binary(0.0)).collect() } else { Vec::new() };
    let lp = &mut mip.base;

    // shared capacity limits
    for w in 0..layout.scenarios {
        for t in 0..layout.periods {
            let column = |slot| (0..members.len()).map(|m| (layout.var(m, w, t, slot), 1.0)).collect::<Vec<_>>();
            let mut stored = column(Slot::Stored);
            if pooled {
                lp.add_row(stored.clone(), Relation::Ge, 0.0);
            }
            stored.push((Layout::ENERGY, -1.0));
            lp.add_row(stored, Relation::Le, 0.0);
            for slot in [Slot::Charge, Slot::Discharge] {
                let mut row = column(slot);
                row.push((Layout::POWER, -1.0));
                lp.add_row(row, Relation::Le, 0.0);
            }
        }
    }

    for (m, &i) in members.iter().enumerate() {
        let building = &model.buildings[i];
        for w in 0..layout.scenarios {
            let peak = layout.peak(m, w);
            if let Some(&s) = switches.get(m) {
                lp.add_row(vec![(peak, 1.0), (s, -st.p_g_max)], Relation::Le, 0.0);
            }
            for t in 0..layout.periods {
                let v = |slot| layout.var(m, w, t, slot);
                let mut soc = vec![(v(Slot::Stored), 1.0), (v(Slot::Charge), -dt * st.eta_ch), (v(Slot::Discharge), dt / st.eta_dis)];
                if t > 0 {
                    soc.push((layout.var(m, w, t - 1, Slot::Stored), -1.0));
                }
                lp.add_row(soc, Relation::Eq, 0.0);

                let net = building.net(w, t);
                let mut balance = vec![(v(Slot::Buy), 1.0), (v(Slot::Sell), -1.0), (v(Slot::Charge), -1.0), (v(Slot::Discharge), 1.0)];
                match switches.get(m) {
                    Some(&s) => {
                        balance.push((s, -net));
                        lp.add_row(balance, Relation::Eq, 0.0);
                        lp.add_row(vec![(v(Slot::Charge), 1.0), (s, -st.p_ch_max)], Relation::Le, 0.0);
                        lp.add_row(vec![(v(Slot::Discharge), 1.0), (s, -st.p_dis_max)], Relation::Le, 0.0);
                    }
                    None => {
                        lp.add_row(balance, Relation::Eq, net);
                    }
                }

                lp.add_row(vec![(v(Slot::Buy), 1.0), (peak, -1.0)], Relation::Le, 0.0);
                if !import_only {
                    lp.add_row(vec![(v(Slot::Sell), 1.0), (peak, -1.0)], Relation::Le, 0.0);
                }
            }
        }
    }
    (mip, layout, switches)
}

/// The sizing-and-operation LP of a nonempty coalition.
pub fn build_sizing_problem(model: &CommunityModel, coalition: &CoalitionKey) -> Result<LinearProgram> {
    if coalition.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    let members: Vec<usize> = coalition.members().collect();
    Ok(build_program(model, &members, false).0.base)
}

/// Dispatch of one building in one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDispatch {
    pub p_ch: Vec<f64>,
    pub p_dis: Vec<f64>,
    /// Stored energy at the end of each period.
    pub e_b: Vec<f64>,
    pub p_gplus: Vec<f64>,
    pub p_gminus: Vec<f64>,
    pub p_gmax: f64,
}

impl ScenarioDispatch {
    /// This building's bill in the scenario, before probability weighting.
    pub fn cost(&self, model: &CommunityModel) -> f64 {
        let dt = model.scenarios.period_hours;
        let energy: f64 = (0..self.p_gplus.len())
            .map(|t| (model.tariff.purchase[t] * self.p_gplus[t] - model.tariff.sell[t] * self.p_gminus[t]) * dt)
            .sum();
        energy + model.tariff.demand_charge * self.p_gmax
    }
}

/// Dispatch of every member, indexed `[member position][scenario]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub members: Vec<usize>,
    pub blocks: Vec<Vec<ScenarioDispatch>>,
}

impl DispatchSchedule {
    fn from_primal(layout: &Layout, x: &[f64]) -> Self {
        let blocks = (0..layout.members.len())
            .map(|m| {
                (0..layout.scenarios)
                    .map(|w| {
                        let series = |slot| (0..layout.periods).map(|t| x[layout.var(m, w, t, slot)]).collect();
                        ScenarioDispatch {
                            p_ch: series(Slot::Charge),
                            p_dis: series(Slot::Discharge),
                            e_b: series(Slot::Stored),
                            p_gplus: series(Slot::Buy),
                            p_gminus: series(Slot::Sell),
                            p_gmax: x[layout.peak(m, w)],
                        }
                    })
                    .collect()
            })
            .collect();
        Self { members: layout.members.clone(), blocks }
    }

    /// Probability-weighted bill of each member.
    pub fn member_opex(&self, model: &CommunityModel) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|scenarios| {
                scenarios.iter().zip(&model.scenarios.probabilities).map(|(d, rho)| rho * d.cost(model)).sum()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionOutcome {
    pub coalition: CoalitionKey,
    /// Minimum total cost of the coalition.
    pub value: f64,
    /// Storage energy capacity, kWh.
    pub energy_capacity: f64,
    /// Storage power capacity, kW.
    pub power_capacity: f64,
    pub capex: f64,
    pub expected_opex: f64,
    /// Expected bill of each member, in member order.
    pub member_opex: Vec<f64>,
    pub schedule: DispatchSchedule,
    pub model_fingerprint: u64,
}

impl CoalitionOutcome {
    /// Expected bill of building `i`, if it is a member.
    pub fn opex_of(&self, i: usize) -> Option<f64> {
        self.schedule.members.iter().position(|&m| m == i).map(|m| self.member_opex[m])
    }
}

/// Solves the sizing LP without touching any cache.
pub fn solve_coalition(model: &CommunityModel, coalition: &CoalitionKey) -> Result<CoalitionOutcome> {
    if coalition.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    let members: Vec<usize> = coalition.members().collect();
    let (mip, layout, _) = build_program(model, &members, false);
    let sol = solve_lp(&mip.base)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::InfeasibleCoalition { coalition: coalition.to_string() }),
        LpStatus::Unbounded => {
            return Err(Error::Internal(format!("coalition {coalition}: sizing problem is unbounded")));
        }
    }
    let mut x = sol.primal;
    let mut value = sol.objective_value;
    if !complementarity::find_violations(&DispatchSchedule::from_primal(&layout, &x), POLISH_TRIGGER).is_empty() {
        if let Some(clean) = polish(&mip.base, &layout, value) {
            value = mip.base.objective_value(&clean);
            x = clean;
        }
    }
    let x = &x;
    let energy_capacity = x[Layout::ENERGY];
    let power_capacity = x[Layout::POWER];
    let capex = model.storage.k_e * energy_capacity + model.storage.k_p * power_capacity;
    let schedule = DispatchSchedule::from_primal(&layout, x);
    let member_opex = schedule.member_opex(model);
    Ok(CoalitionOutcome {
        coalition: coalition.clone(),
        value,
        energy_capacity,
        power_capacity,
        capex,
        expected_opex: value - capex,
        member_opex,
        schedule,
        model_fingerprint: model.fingerprint(),
    })
}

const POLISH_TRIGGER: f64 = 1e-9;

/// Re-solves over the optimal face for the schedule with the least battery
/// and grid throughput.
///
/// Ties in the sizing LP can be broken by charging and discharging at once,
/// which burns surplus energy in conversion losses. When sale earns nothing
/// that costs the same as exporting, but it is not a schedule a battery can
/// run. Minimizing throughput picks an equally cheap schedule without it.
/// Returns `None` if the face LP does not solve cleanly, keeping the first answer.
fn polish(lp: &LinearProgram, layout: &Layout, optimum: f64) -> Option<Vec<f64>> {
    let mut face = lp.clone();
    let cost_row = face.objective().iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
    face.add_row(cost_row, Relation::Le, optimum + 1e-10 * optimum.abs().max(1.0));
    for j in 0..face.num_vars() {
        face.set_cost(j, 0.0);
    }
    for m in 0..layout.members.len() {
        for w in 0..layout.scenarios {
            for t in 0..layout.periods {
                for slot in [Slot::Charge, Slot::Discharge, Slot::Buy, Slot::Sell] {
                    face.set_cost(layout.var(m, w, t, slot), 1.0);
                }
            }
        }
    }
    match solve_lp(&face) {
        Ok(sol) if sol.is_optimal() => Some(sol.primal),
        Ok(_) => None,
        Err(e) => {
            log::debug!("throughput polish failed: {e}");
            None
        }
    }
}

/// Memoized coalition outcomes for one community model.
///
/// Safe to share between threads. Two threads racing on the same key both
/// solve it and the later insert wins; the results are identical.
#[derive(Debug)]
pub struct CharacteristicCache {
    fingerprint: u64,
    map: RwLock<HashMap<CoalitionKey, Arc<CoalitionOutcome>>>,
}

impl CharacteristicCache {
    pub fn new(model: &CommunityModel) -> Self {
        Self { fingerprint: model.fingerprint(), map: RwLock::new(HashMap::new()) }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn get(&self, key: &CoalitionKey) -> Option<Arc<CoalitionOutcome>> {
        self.map.read().get(key).cloned()
    }

    /// Number of distinct coalitions evaluated so far.
    pub fn query_count(&self) -> usize {
        self.map.read().len()
    }

    pub fn keys(&self) -> Vec<CoalitionKey> {
        let mut keys: Vec<_> = self.map.read().keys().cloned().collect();
        keys.sort();
        keys
    }

    pub fn outcomes(&self) -> Vec<Arc<CoalitionOutcome>> {
        let map = self.map.read();
        let mut v: Vec<_> = map.values().cloned().collect();
        v.sort_by(|a, b| a.coalition.cmp(&b.coalition));
        v
    }

    fn insert(&self, outcome: CoalitionOutcome) -> Arc<CoalitionOutcome> {
        let outcome = Arc::new(outcome);
        self.map.write().insert(outcome.coalition.clone(), outcome.clone());
        outcome
    }
}

/// Returns the cached outcome of `coalition`, solving it on a miss.
pub fn evaluate_coalition(
    model: &CommunityModel,
    coalition: &CoalitionKey,
    cache: &CharacteristicCache,
) -> Result<Arc<CoalitionOutcome>> {
    if model.fingerprint() != cache.fingerprint {
        return Err(Error::ModelMismatch);
    }
    if let Some(hit) = cache.get(coalition) {
        return Ok(hit);
    }
    let outcome = solve_coalition(model, coalition)?;
    log::debug!("coalition {} -> {:.6}", coalition.to_hex(), outcome.value);
    Ok(cache.insert(outcome))
}

/// Expected bill of building `i` with no storage at all.
pub fn no_storage_cost(model: &CommunityModel, i: usize) -> Result<f64> {
    let b = model
        .buildings
        .get(i)
        .ok_or_else(|| Error::validation("building", format!("index {i} out of range")))?;
    let dt = model.scenarios.period_hours;
    let tariff = &model.tariff;
    let mut total = 0.0;
    for (w, rho) in model.scenarios.probabilities.iter().enumerate() {
        let mut cost = 0.0;
        let mut peak: f64 = 0.0;
        for t in 0..model.n_periods() {
            let net = b.net(w, t);
            cost += (tariff.purchase[t] * net.max(0.0) - tariff.sell[t] * (-net).max(0.0)) * dt;
            let exchange = if model.options.demand_charge_import_only { net.max(0.0) } else { net.abs() };
            peak = peak.max(exchange);
        }
        total += rho * (cost + tariff.demand_charge * peak);
    }
    Ok(total)
}

/// Individual storage: the building sizes and runs its own unit.
pub fn ies_outcome(model: &CommunityModel, i: usize, cache: &CharacteristicCache) -> Result<Arc<CoalitionOutcome>> {
    if i >= model.n_buildings() {
        return Err(Error::validation("building", format!("index {i} out of range")));
    }
    evaluate_coalition(model, &CoalitionKey::singleton(model.n_buildings(), i), cache)
}
