//! Community instance data: building profiles, scenarios, tariff and storage economics.

mod config;
mod key;

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{dir_paths, load_community, load_community_with, read_config, ConfigFile, DEFAULT_CONFIG};
pub use key::CoalitionKey;

/// Hourly load and generation of one building, indexed `[scenario][period]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingProfile {
    pub id: String,
    pub demand: Vec<Vec<f64>>,
    pub renewable: Vec<Vec<f64>>,
}

impl BuildingProfile {
    /// Net load `d - r` in kW.
    pub fn net(&self, scenario: usize, t: usize) -> f64 {
        self.demand[scenario][t] - self.renewable[scenario][t]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |m: &Vec<Vec<f64>>| m.iter().map(|row| row.iter().map(|v| v * factor).collect()).collect();
        Self { id: self.id.clone(), demand: scale(&self.demand), renewable: scale(&self.renewable) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub ids: Vec<String>,
    pub probabilities: Vec<f64>,
    pub periods: usize,
    /// Period length in hours.
    pub period_hours: f64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// Purchase price per kWh for each period.
    pub purchase: Vec<f64>,
    /// Sale price per kWh for each period.
    pub sell: Vec<f64>,
    /// Price per kW of the scenario's peak grid exchange.
    pub demand_charge: f64,
}

/// Purchase price in period `t`.
pub fn tariff_price_at(tariff: &Tariff, t: usize) -> Result<f64> {
    tariff.purchase.get(t).copied().ok_or_else(|| {
        Error::validation("t", format!("period {t} out of range for a {}-period tariff", tariff.purchase.len()))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    /// Amortized energy-capacity price per kWh and planning cycle.
    pub k_e: f64,
    /// Amortized power-capacity price per kW and planning cycle.
    pub k_p: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    /// Per-building cap on grid purchase and sale, kW.
    pub p_g_max: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    /// Each building keeps its own stored energy.
    #[default]
    PerBuilding,
    /// Stored energy is a common pool; only the total must stay nonnegative.
    Pooled,
}

impl std::str::FromStr for SharingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_building" | "per-building" => Ok(Self::PerBuilding),
            "pooled" => Ok(Self::Pooled),
            other => Err(Error::validation("sharing_mode", format!("unknown mode `{other}`, expected per_building or pooled"))),
        }
    }
}

impl std::fmt::Display for SharingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Self::PerBuilding => "per_building",
            Self::Pooled => "pooled",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub sharing_mode: SharingMode,
    /// Forces every building's storage to end the horizon empty, like it started.
    pub periodic_soc: bool,
    /// Bill the demand charge on peak purchase only, not on peak sale.
    pub demand_charge_import_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityModel {
    pub buildings: Vec<BuildingProfile>,
    pub scenarios: ScenarioSet,
    pub tariff: Tariff,
    pub storage: StorageParams,
    pub options: ModelOptions,
}

impl CommunityModel {
    /// Builds a model and checks every invariant.
    pub fn new(
        buildings: Vec<BuildingProfile>,
        scenarios: ScenarioSet,
        tariff: Tariff,
        storage: StorageParams,
        options: ModelOptions,
    ) -> Result<Self> {
        let model = Self { buildings, scenarios, tariff, storage, options };
        model.validate()?;
        Ok(model)
    }

    pub fn n_buildings(&self) -> usize {
        self.buildings.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn n_periods(&self) -> usize {
        self.scenarios.periods
    }

    pub fn sharing_mode(&self) -> SharingMode {
        self.options.sharing_mode
    }

    pub fn with_sharing_mode(&self, mode: SharingMode) -> Self {
        let mut m = self.clone();
        m.options.sharing_mode = mode;
        m
    }

    pub fn grand_coalition(&self) -> CoalitionKey {
        CoalitionKey::grand(self.n_buildings())
    }

    pub fn building_index(&self, id: &str) -> Result<usize> {
        self.buildings
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| Error::UnknownBuilding(id.to_string()))
    }

    /// Parses a comma-separated list of building ids or 1-based indices.
    pub fn parse_coalition(&self, spec: &str) -> Result<CoalitionKey> {
        let n = self.n_buildings();
        let mut key = CoalitionKey::empty(n);
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let idx = match self.building_index(item) {
                Ok(i) => i,
                Err(e) => match item.parse::<usize>() {
                    Ok(k) if (1..=n).contains(&k) => k - 1,
                    _ => return Err(e),
                },
            };
            key.insert(idx);
        }
        if key.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        Ok(key)
    }

    /// Stable hash of every input that can change a coalition value.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let floats = |h: &mut DefaultHasher, xs: &[f64]| {
            xs.len().hash(h);
            for x in xs {
                x.to_bits().hash(h);
            }
        };
        self.buildings.len().hash(&mut h);
        for b in &self.buildings {
            b.id.hash(&mut h);
            for row in b.demand.iter().chain(&b.renewable) {
                floats(&mut h, row);
            }
        }
        self.scenarios.ids.hash(&mut h);
        floats(&mut h, &self.scenarios.probabilities);
        self.scenarios.periods.hash(&mut h);
        floats(&mut h, &[self.scenarios.period_hours]);
        floats(&mut h, &self.tariff.purchase);
        floats(&mut h, &self.tariff.sell);
        let s = &self.storage;
        floats(
            &mut h,
            &[self.tariff.demand_charge, s.k_e, s.k_p, s.eta_ch, s.eta_dis, s.p_ch_max, s.p_dis_max, s.p_g_max],
        );
        self.options.sharing_mode.hash(&mut h);
        self.options.periodic_soc.hash(&mut h);
        self.options.demand_charge_import_only.hash(&mut h);
        h.finish()
    }

    /// Multiplies every demand and renewable trace by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.buildings = self.buildings.iter().map(|b| b.scaled(factor)).collect();
        m
    }

    /// Keeps only the listed buildings, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let buildings = indices.iter().map(|&i| self.buildings[i].clone()).collect();
        Self::new(buildings, self.scenarios.clone(), self.tariff.clone(), self.storage.clone(), self.options)
    }

    pub fn validate(&self) -> Result<()> {
        let sc = &self.scenarios;
        if sc.periods < 1 {
            return Err(Error::validation("periods", "at least one period is required"));
        }
        if !(sc.period_hours.is_finite() && sc.period_hours > 0.0) {
            return Err(Error::validation("period_hours", format!("must be positive, got {}", sc.period_hours)));
        }
        if sc.is_empty() {
            return Err(Error::validation("probabilities", "no scenarios"));
        }
        if sc.ids.len() != sc.probabilities.len() {
            return Err(Error::validation("scenario_id", "one id per probability is required"));
        }
        for (id, &p) in sc.ids.iter().zip(&sc.probabilities) {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::validation("probability", format!("scenario {id} has probability {p}")));
            }
        }
        let total: f64 = sc.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation("probabilities", format!("probabilities sum to {total}")));
        }

        let t = &self.tariff;
        let periods = sc.periods;
        if t.purchase.len() != periods {
            return Err(Error::validation(
                "tariff.purchase",
                format!("{} prices for {periods} periods", t.purchase.len()),
            ));
        }
        if t.sell.len() != periods {
            return Err(Error::validation("tariff.sell", format!("{} prices for {periods} periods", t.sell.len())));
        }
        for k in 0..periods {
            let (buy, sell) = (t.purchase[k], t.sell[k]);
            if !(buy.is_finite() && sell.is_finite()) {
                return Err(Error::validation("tariff", format!("non-finite price at period {k}")));
            }
            if sell < 0.0 {
                return Err(Error::validation("tariff.sell", format!("negative sell price {sell} at period {k}")));
            }
            if buy <= sell {
                return Err(Error::validation(
                    "tariff.purchase",
                    format!("purchase price {buy} must exceed sell price {sell} at period {k}"),
                ));
            }
        }
        if !(t.demand_charge.is_finite() && t.demand_charge >= 0.0) {
            return Err(Error::validation("tariff.demand_charge", format!("must be nonnegative, got {}", t.demand_charge)));
        }

        let s = &self.storage;
        for (field, v) in [("storage.k_e", s.k_e), ("storage.k_p", s.k_p)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(field, format!("must be nonnegative, got {v}")));
            }
        }
        for (field, v) in [("storage.eta_ch", s.eta_ch), ("storage.eta_dis", s.eta_dis)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::validation(field, format!("must lie in (0, 1], got {v}")));
            }
        }
        for (field, v) in [("storage.p_ch_max", s.p_ch_max), ("storage.p_dis_max", s.p_dis_max), ("storage.p_g_max", s.p_g_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be positive, got {v}")));
            }
        }

        if self.buildings.is_empty() {
            return Err(Error::validation("building_id", "no buildings"));
        }
        let mut seen = std::collections::HashSet::new();
        for b in &self.buildings {
            if !seen.insert(b.id.as_str()) {
                return Err(Error::validation("building_id", format!("duplicate building {}", b.id)));
            }
            for (field, m) in [("demand_kw", &b.demand), ("renewable_kw", &b.renewable)] {
                if m.len() != sc.len() || m.iter().any(|row| row.len() != periods) {
                    return Err(Error::validation(
                        field,
                        format!("building {} does not have {} scenarios x {periods} periods", b.id, sc.len()),
                    ));
                }
                for (w, row) in m.iter().enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(Error::validation(
                                field,
                                format!("building {} scenario {} period {k}: {v}", b.id, sc.ids[w]),
                            ));
                        }
                    }
                }
            }
            for w in 0..sc.len() {
                for k in 0..periods {
                    let net = b.net(w, k);
                    if net.abs() > s.p_g_max {
                        return Err(Error::validation(
                            "storage.p_g_max",
                            format!(
                                "building {} scenario {} period {k} has net load {net} kW beyond the grid cap {}",
                                b.id, sc.ids[w], s.p_g_max
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes `profiles.csv`, `scenarios.csv` and `config.toml` into `dir`.
    /// Loading the directory back yields an equal model.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut profiles = String::from("building_id,scenario_id,period,demand_kw,renewable_kw\n");
        for b in &self.buildings {
            for (w, sid) in self.scenarios.ids.iter().enumerate() {
                for k in 0..self.n_periods() {
                    profiles.push_str(&format!("{},{},{},{:?},{:?}\n", b.id, sid, k, b.demand[w][k], b.renewable[w][k]));
                }
            }
        }
        let mut scenarios = String::from("scenario_id,probability\n");
        for (sid, p) in self.scenarios.ids.iter().zip(&self.scenarios.probabilities) {
            scenarios.push_str(&format!("{sid},{p:?}\n"));
        }
        let config = config::to_config_text(self)?;
        for (name, text) in [("profiles.csv", profiles), ("scenarios.csv", scenarios), ("config.toml", config)] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Capital recovery factor `r(1+r)^L / ((1+r)^L - 1)`, or `1/L` at zero interest.
pub fn capital_recovery_factor(rate: f64, lifetime: f64) -> f64 {
    if rate == 0.0 {
        return 1.0 / lifetime;
    }
    let g = (1.0 + rate).powf(lifetime);
    rate * g / (g - 1.0)
}

/// Spreads capacity prices over the lifetime's planning cycles.
pub fn amortized_capacity_prices(
    price_e: f64,
    price_p: f64,
    rate: f64,
    lifetime: f64,
    cycles_per_year: f64,
) -> Result<(f64, f64)> {
    let checks = [
        ("storage.price_e", price_e, 0.0),
        ("storage.price_p", price_p, 0.0),
        ("storage.rate", rate, 0.0),
        ("storage.lifetime", lifetime, 1.0),
        ("storage.cycles_per_year", cycles_per_year, 1.0),
    ];
    for (field, v, min) in checks {
        if !v.is_finite() {
            return Err(Error::validation(field, format!("must be finite, got {v}")));
        }
        if v < min {
            return Err(Error::validation(field, format!("must be at least {min}, got {v}")));
        }
    }
    let f = capital_recovery_factor(rate, lifetime) / cycles_per_year;
    Ok((price_e * f, price_p * f))
}
