use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::game::CostGame;
use crate::coalition::build_program;
use crate::error::{Error, Result};
use crate::model::{CoalitionKey, CommunityModel};
use crate::solver::{solve_milp, LpStatus, Relation};

/// Excess accepted as a genuine violation during constraint generation.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub coalition: CoalitionKey,
    /// `x(S) - v(S) - z`.
    pub excess: f64,
    /// `v(S)` as seen by the search.
    pub value: f64,
}

/// Most violated proper coalition, or `None` when none exceeds the tolerance.
pub fn most_violated_coalition<G: CostGame + ?Sized>(
    game: &G,
    x: &[f64],
    z: f64,
    exclude: &[CoalitionKey],
) -> Result<Option<Violation>> {
    Ok(game.max_excess(x, z, exclude)?.filter(|v| v.excess > VIOLATION_TOL))
}

/// Exhaustive search over proper coalitions, lowest mask winning ties.
pub fn most_violated_by_enumeration(
    players: usize,
    value: impl Fn(u64) -> f64,
    x: &[f64],
    z: f64,
    exclude: &[CoalitionKey],
) -> Option<Violation> {
    assert!(players < 64, "enumeration needs a single-word mask");
    let skip: HashSet<u64> = exclude.iter().filter_map(CoalitionKey::bits).collect();
    let full = (1u64 << players) - 1;
    let mut best: Option<Violation> = None;
    for mask in 1..full {
        if skip.contains(&mask) {
            continue;
        }
        let key = CoalitionKey::from_bits(players, mask);
        let v = value(mask);
        let e = super::coalition_sum(x, &key) - v - z;
        if best.as_ref().is_none_or(|b| e > b.excess) {
            best = Some(Violation { coalition: key, excess: e, value: v });
        }
    }
    best
}

fn proper_count(players: usize, exclude: &[CoalitionKey]) -> usize {
    let grand = CoalitionKey::grand(players);
    exclude.iter().filter(|k| !k.is_empty() && **k != grand).collect::<HashSet<_>>().len()
}

/// Violation search over a community by one MILP that picks members and
/// dispatches their shared storage together.
pub(crate) fn community_max_excess(
    model: &CommunityModel,
    x: &[f64],
    z: f64,
    exclude: &[CoalitionKey],
) -> Result<Option<Violation>> {
    let n = model.n_buildings();
    if x.len() != n {
        return Err(Error::validation("allocation", format!("{} entries for {n} buildings", x.len())));
    }
    if n < 2 || n < 63 && proper_count(n, exclude) >= (1usize << n) - 2 {
        return Ok(None);
    }
    let members: Vec<usize> = (0..n).collect();
    let (mut mip, _, s) = build_program(model, &members, true);
    for (i, &si) in s.iter().enumerate() {
        mip.base.set_cost(si, -x[i]);
    }
    let all: Vec<(usize, f64)> = s.iter().map(|&v| (v, 1.0)).collect();
    mip.base.add_row(all.clone(), Relation::Ge, 1.0);
    mip.base.add_row(all, Relation::Le, (n - 1) as f64);
    for key in exclude {
        let inside = key.len();
        if inside == 0 || inside == n {
            continue;
        }
        let cut = (0..n).map(|i| (s[i], if key.contains(i) { -1.0 } else { 1.0 })).collect();
        mip.base.add_row(cut, Relation::Ge, 1.0 - inside as f64);
    }
    let sol = solve_milp(&mip)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => return Err(Error::Internal("violation search is unbounded".into())),
    }
    let coalition = CoalitionKey::from_members(n, (0..n).filter(|&i| sol.primal[s[i]] > 0.5));
    let gain = -sol.objective_value;
    let value = super::coalition_sum(x, &coalition) - gain;
    log::debug!("violation search: {} excess {:.6}", coalition.to_hex(), gain - z);
    Ok(Some(Violation { coalition, excess: gain - z, value }))
}
