use super::game::{CommunityGame, CostGame};
use super::{dsat, require_players, AllocationResult, Method};
use crate::coalition::{evaluate_coalition, no_storage_cost, CharacteristicCache};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct ProportionalOptions {
    /// Split capital cost equally when no building saves on its bill,
    /// instead of failing.
    pub equal_split_when_degenerate: bool,
}

/// Each building pays its own bill plus a share of `capex` proportional to its bill reduction.
pub fn proportional_split(baseline: &[f64], opex: &[f64], capex: f64, equal_split: bool) -> Result<Vec<f64>> {
    assert_eq!(baseline.len(), opex.len());
    let n = opex.len() as f64;
    let reductions: Vec<f64> = baseline.iter().zip(opex).map(|(b, o)| b - o).collect();
    let total: f64 = reductions.iter().sum();
    let shares: Vec<f64> = if capex == 0.0 {
        vec![0.0; opex.len()]
    } else if total > 1e-12 * baseline.iter().map(|b| b.abs()).sum::<f64>().max(1.0) {
        reductions.iter().map(|r| r * capex / total).collect()
    } else if equal_split {
        vec![capex / n; opex.len()]
    } else {
        return Err(Error::DegenerateProportional);
    };
    Ok(opex.iter().zip(shares).map(|(o, s)| o + s).collect())
}

/// Proportional allocation from the grand coalition's schedule.
pub fn proportional(
    model: &crate::model::CommunityModel,
    cache: &CharacteristicCache,
    opts: ProportionalOptions,
) -> Result<AllocationResult> {
    let n = model.n_buildings();
    require_players(n)?;
    let game = CommunityGame::new(model, cache)?;
    let grand_key = model.grand_coalition();
    game.value(&grand_key)?;
    let grand = evaluate_coalition(model, &grand_key, cache)?;
    let baseline = (0..n).map(|i| no_storage_cost(model, i)).collect::<Result<Vec<_>>>()?;
    let x = proportional_split(&baseline, &grand.member_opex, grand.capex, opts.equal_split_when_degenerate)?;
    let coalitions_queried = game.coalitions_queried();
    let dsat = dsat(&game, &x)?;
    Ok(AllocationResult { method: Method::Proportional, allocation: x, dsat, episodes: 0, coalitions_queried, trace: Vec::new() })
}
