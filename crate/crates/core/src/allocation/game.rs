use std::collections::HashSet;
use std::fs;
use std::path::Path;

use parking_lot::Mutex;

use super::separation::{community_max_excess, most_violated_by_enumeration, Violation};
use crate::coalition::{evaluate_coalition, CharacteristicCache};
use crate::error::{Error, Result};
use crate::model::{CoalitionKey, CommunityModel};

/// A transferable-utility cost game.
pub trait CostGame: Sync {
    fn players(&self) -> usize;

    /// Cost of a nonempty coalition.
    fn value(&self, coalition: &CoalitionKey) -> Result<f64>;

    /// Distinct coalitions whose value was requested through [`CostGame::value`].
    fn coalitions_queried(&self) -> usize;

    /// Proper coalition maximizing `x(S) - v(S) - z`, skipping `exclude`.
    ///
    /// The excess is returned whatever its sign. `None` means every proper
    /// coalition is excluded.
    fn max_excess(&self, x: &[f64], z: f64, exclude: &[CoalitionKey]) -> Result<Option<Violation>>;
}

/// A game given by an explicit value for every coalition.
#[derive(Debug)]
pub struct TableGame {
    players: usize,
    /// Indexed by bitmask; entry 0 is the empty coalition.
    values: Vec<f64>,
    touched: Mutex<HashSet<u64>>,
}

impl Clone for TableGame {
    fn clone(&self) -> Self {
        Self::new(self.players, self.values.clone()).expect("already validated")
    }
}

impl TableGame {
    pub const MAX_PLAYERS: usize = 24;

    /// `values[mask]` is the cost of the coalition with bitmask `mask`.
    pub fn new(players: usize, mut values: Vec<f64>) -> Result<Self> {
        if players == 0 || players > Self::MAX_PLAYERS {
            return Err(Error::validation("players", format!("{players} players unsupported for explicit games")));
        }
        if values.len() != 1 << players {
            return Err(Error::validation("values", format!("expected {} values, got {}", 1usize << players, values.len())));
        }
        if let Some(mask) = values.iter().skip(1).position(|v| !v.is_finite()) {
            return Err(Error::validation("values", format!("non-finite value for mask {:#x}", mask + 1)));
        }
        values[0] = 0.0;
        Ok(Self { players, values, touched: Mutex::new(HashSet::new()) })
    }

    pub fn from_fn(players: usize, f: impl Fn(&CoalitionKey) -> f64) -> Result<Self> {
        let values = (0..1u64 << players)
            .map(|m| if m == 0 { 0.0 } else { f(&CoalitionKey::from_bits(players, m)) })
            .collect();
        Self::new(players, values)
    }

    /// Reads `coalition,value` rows where coalitions are `+`-joined 1-based indices.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| match e {
            Error::Validation { field, message } => {
                Error::Parse { path: path.to_path_buf(), message: format!("{field}: {message}") }
            }
            other => other,
        })
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::validation("coalition", e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::validation("coalition", format!("expected 2 fields, got {}", record.len())));
            }
            let members = record[0]
                .split('+')
                .map(|p| match p.trim().parse::<usize>() {
                    Ok(k) if (1..=Self::MAX_PLAYERS).contains(&k) => Ok(k - 1),
                    _ => Err(Error::validation("coalition", format!("bad member `{p}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let value: f64 =
                record[1].parse().map_err(|_| Error::validation("value", format!("cannot parse `{}`", &record[1])))?;
            rows.push((members, value));
        }
        let players = rows.iter().flat_map(|(m, _)| m.iter()).max().map_or(0, |&i| i + 1);
        if players == 0 {
            return Err(Error::validation("coalition", "no rows"));
        }
        let mut values = vec![f64::NAN; 1 << players];
        for (members, value) in rows {
            let mask = members.iter().fold(0usize, |acc, &i| acc | 1 << i);
            if !values[mask].is_nan() {
                return Err(Error::validation("coalition", format!("duplicate coalition {mask:#x}")));
            }
            values[mask] = value;
        }
        if let Some(mask) = values.iter().skip(1).position(|v| v.is_nan()) {
            return Err(Error::validation("coalition", format!("missing value for {}", CoalitionKey::from_bits(players, mask as u64 + 1))));
        }
        Self::new(players, values)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("coalition,value\n");
        for mask in 1..self.values.len() {
            let key = CoalitionKey::from_bits(self.players, mask as u64);
            let name: Vec<String> = key.members().map(|i| (i + 1).to_string()).collect();
            out.push_str(&format!("{},{:?}\n", name.join("+"), self.values[mask]));
        }
        out
    }

    /// Value without counting it as a query.
    pub fn raw(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }

    /// Same game with players relabeled: new player `perm[i]` is old player `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.players;
        let mut values = vec![0.0; self.values.len()];
        for (mask, &v) in self.values.iter().enumerate() {
            let moved = (0..n).filter(|i| mask & (1 << i) != 0).fold(0usize, |acc, i| acc | 1 << perm[i]);
            values[moved] = v;
        }
        Self::new(n, values).expect("permutation keeps the table valid")
    }
}

impl CostGame for TableGame {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: &CoalitionKey) -> Result<f64> {
        if coalition.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        let mask = coalition.bits().filter(|&m| (m as usize) < self.values.len()).ok_or_else(|| {
            Error::validation("coalition", format!("{coalition} is outside a {}-player game", self.players))
        })?;
        self.touched.lock().insert(mask);
        Ok(self.values[mask as usize])
    }

    fn coalitions_queried(&self) -> usize {
        self.touched.lock().len()
    }

    fn max_excess(&self, x: &[f64], z: f64, exclude: &[CoalitionKey]) -> Result<Option<Violation>> {
        Ok(most_violated_by_enumeration(self.players, |m| self.values[m as usize], x, z, exclude))
    }
}

/// The storage-sharing game of a community, valued through the sizing LP.
pub struct CommunityGame<'a> {
    pub model: &'a CommunityModel,
    pub cache: &'a CharacteristicCache,
    touched: Mutex<HashSet<CoalitionKey>>,
}

impl<'a> CommunityGame<'a> {
    pub fn new(model: &'a CommunityModel, cache: &'a CharacteristicCache) -> Result<Self> {
        if model.fingerprint() != cache.fingerprint() {
            return Err(Error::ModelMismatch);
        }
        Ok(Self { model, cache, touched: Mutex::new(HashSet::new()) })
    }

    /// Reads every coalition value into an explicit table.
    pub fn to_table(&self) -> Result<TableGame> {
        let n = self.model.n_buildings();
        if n > TableGame::MAX_PLAYERS {
            return Err(Error::TooManyPlayers { players: n, limit: TableGame::MAX_PLAYERS });
        }
        let mut values = vec![0.0; 1 << n];
        for (mask, v) in values.iter_mut().enumerate().skip(1) {
            *v = self.value(&CoalitionKey::from_bits(n, mask as u64))?;
        }
        TableGame::new(n, values)
    }
}

impl CostGame for CommunityGame<'_> {
    fn players(&self) -> usize {
        self.model.n_buildings()
    }

    fn value(&self, coalition: &CoalitionKey) -> Result<f64> {
        let outcome = evaluate_coalition(self.model, coalition, self.cache)?;
        self.touched.lock().insert(coalition.clone());
        Ok(outcome.value)
    }

    fn coalitions_queried(&self) -> usize {
        self.touched.lock().len()
    }

    fn max_excess(&self, x: &[f64], z: f64, exclude: &[CoalitionKey]) -> Result<Option<Violation>> {
        community_max_excess(self.model, x, z, exclude)
    }
}
