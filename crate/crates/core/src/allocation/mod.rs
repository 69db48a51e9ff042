//! Cost allocation among buildings: nucleolus, Shapley value, proportional split, and core checks.

mod game;
mod nucleolus;
mod proportional;
mod separation;
mod shapley;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CoalitionKey;

pub use game::{CommunityGame, CostGame, TableGame};
pub use nucleolus::{
    master_solve, nucleolus, nucleolus_with, uniqueness_check, Binding, MasterSolution, NucleolusOptions,
};
pub use proportional::{proportional, proportional_split, ProportionalOptions};
pub use separation::{most_violated_by_enumeration, most_violated_coalition, Violation, VIOLATION_TOL};
pub use shapley::{shapley, shapley_weights, DEFAULT_SHAPLEY_LIMIT};

/// Tolerance for treating an allocation as efficient or a coalition as satisfied.
pub const EFFICIENCY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nucleolus,
    Shapley,
    Proportional,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nucleolus, Method::Shapley, Method::Proportional];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nucleolus => "nucleolus",
            Method::Shapley => "shapley",
            Method::Proportional => "proportional",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation("method", format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    Master,
    Violate,
    Bind,
}

/// One line of the constraint-generation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: usize,
    pub action: TraceAction,
    /// Hex bitmask; absent for master solves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalition: Option<String>,
    /// Excess above the current level, for found violations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess: Option<f64>,
    pub z: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub method: Method,
    /// Cost assigned to each building.
    pub allocation: Vec<f64>,
    /// Largest excess over proper coalitions; nonpositive means no group wants to leave.
    pub dsat: f64,
    /// Lexicographic rounds used; zero for methods without rounds.
    pub episodes: usize,
    /// Distinct coalition values the method needed.
    pub coalitions_queried: usize,
    pub trace: Vec<TraceRecord>,
}

impl AllocationResult {
    pub fn satisfied(&self) -> bool {
        self.dsat <= EFFICIENCY_TOL
    }

    pub fn total(&self) -> f64 {
        self.allocation.iter().sum()
    }
}

pub(crate) fn coalition_sum(x: &[f64], s: &CoalitionKey) -> f64 {
    s.members().map(|i| x[i]).sum()
}

/// `x(S) - v(S)`: how much `S` pays beyond its stand-alone cost.
pub fn excess<G: CostGame + ?Sized>(game: &G, x: &[f64], coalition: &CoalitionKey) -> Result<f64> {
    Ok(coalition_sum(x, coalition) - game.value(coalition)?)
}

/// Maximum excess over proper nonempty coalitions.
pub fn dsat<G: CostGame + ?Sized>(game: &G, x: &[f64]) -> Result<f64> {
    require_players(game.players())?;
    match game.max_excess(x, 0.0, &[])? {
        Some(v) => Ok(v.excess),
        None => Err(Error::Internal("no proper coalition to check".into())),
    }
}

/// Efficient and no coalition has positive excess.
pub fn in_core<G: CostGame + ?Sized>(game: &G, x: &[f64]) -> Result<bool> {
    let grand = game.value(&CoalitionKey::grand(game.players()))?;
    let efficient = (x.iter().sum::<f64>() - grand).abs() <= EFFICIENCY_TOL * grand.abs().max(1.0);
    Ok(efficient && dsat(game, x)? <= EFFICIENCY_TOL)
}

pub(crate) fn require_players(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::validation("buildings", "allocation needs at least two buildings"));
    }
    Ok(())
}
