use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    amortized_capacity_prices, BuildingProfile, CommunityModel, ModelOptions, ScenarioSet, SharingMode, StorageParams,
    Tariff,
};
use crate::error::{Error, Result};

/// Parsed config file, before profiles are attached.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub tariff: TariffSection,
    pub storage: StorageSection,
    #[serde(default)]
    pub scenarios: ScenarioSection,
    #[serde(default)]
    pub options: OptionsSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purchase: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tou_bands: Option<Vec<TouBand>>,
    pub sell: PriceSeries,
    pub demand_charge: f64,
}

/// Price applying to hours of day in `[start_hour, end_hour)`; wraps past midnight when start > end.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TouBand {
    pub start_hour: f64,
    pub end_hour: f64,
    pub price: f64,
}

impl TouBand {
    fn covers(&self, hour: f64) -> bool {
        if self.start_hour <= self.end_hour {
            hour >= self.start_hour && hour < self.end_hour
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceSeries {
    Flat(f64),
    PerPeriod(Vec<f64>),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSection {
    pub price_e: Option<f64>,
    pub price_p: Option<f64>,
    pub rate: Option<f64>,
    pub lifetime: Option<f64>,
    pub cycles_per_year: Option<f64>,
    pub k_e: Option<f64>,
    pub k_p: Option<f64>,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub p_ch_max: Option<f64>,
    pub p_dis_max: Option<f64>,
    pub p_g_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Resolved against the config file's directory.
    #[serde(default = "default_probabilities_file")]
    pub probabilities_file: String,
    #[serde(default = "default_period_hours")]
    pub period_hours: f64,
}

fn default_probabilities_file() -> String {
    "scenarios.csv".into()
}

fn default_period_hours() -> f64 {
    1.0
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { probabilities_file: default_probabilities_file(), period_hours: default_period_hours() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSection {
    #[serde(default)]
    pub sharing_mode: SharingMode,
    #[serde(default)]
    pub periodic_soc: bool,
    #[serde(default)]
    pub demand_charge_import_only: bool,
}

/// Settings shipped in `config/default.toml`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../../config/default.toml");

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The shipped default settings.
    pub fn shipped_default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped default config parses")
    }

    /// Per-period tariff for a horizon of `periods` periods.
    pub fn tariff(&self, periods: usize) -> Result<Tariff> {
        build_tariff(&self.tariff, periods, self.scenarios.period_hours)
    }

    pub fn storage_params(&self) -> Result<StorageParams> {
        build_storage(&self.storage)
    }

    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            sharing_mode: self.options.sharing_mode,
            periodic_soc: self.options.periodic_soc,
            demand_charge_import_only: self.options.demand_charge_import_only,
        }
    }
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConfigFile::parse(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Loads profiles and config, resolving the scenario file next to the config.
pub fn load_community(profile_path: &Path, config_path: &Path) -> Result<CommunityModel> {
    load_community_with(profile_path, config_path, None)
}

/// Like [`load_community`], optionally overriding the config's sharing mode.
pub fn load_community_with(
    profile_path: &Path,
    config_path: &Path,
    sharing: Option<SharingMode>,
) -> Result<CommunityModel> {
    let config = read_config(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let scenario_path = base.join(&config.scenarios.probabilities_file);
    let (ids, probabilities) = read_scenarios(&scenario_path)?;
    let (buildings, periods) = read_profiles(profile_path, &ids)?;

    let scenarios = ScenarioSet { ids, probabilities, periods, period_hours: config.scenarios.period_hours };
    let tariff = config.tariff(periods)?;
    let storage = config.storage_params()?;
    let mut options = config.model_options();
    if let Some(mode) = sharing {
        options.sharing_mode = mode;
    }
    CommunityModel::new(buildings, scenarios, tariff, storage, options)
}

fn build_tariff(section: &TariffSection, periods: usize, period_hours: f64) -> Result<Tariff> {
    let purchase = match (&section.purchase, &section.tou_bands) {
        (Some(_), Some(_)) => {
            return Err(Error::validation("tariff", "give either `purchase` or `tou_bands`, not both"));
        }
        (None, None) => return Err(Error::validation("tariff.purchase", "missing purchase prices or tou_bands")),
        (Some(v), None) => v.clone(),
        (None, Some(bands)) => {
            let mut prices = Vec::with_capacity(periods);
            for t in 0..periods {
                let hour = (t as f64 * period_hours) % 24.0;
                let band = bands.iter().find(|b| b.covers(hour)).ok_or_else(|| {
                    Error::validation("tariff.tou_bands", format!("no band covers hour {hour} (period {t})"))
                })?;
                prices.push(band.price);
            }
            prices
        }
    };
    let sell = match &section.sell {
        PriceSeries::Flat(v) => vec![*v; periods],
        PriceSeries::PerPeriod(v) => v.clone(),
    };
    Ok(Tariff { purchase, sell, demand_charge: section.demand_charge })
}

fn build_storage(s: &StorageSection) -> Result<StorageParams> {
    let amortized = [s.price_e, s.price_p, s.rate, s.lifetime, s.cycles_per_year];
    let (k_e, k_p) = match (s.k_e, s.k_p) {
        (Some(k_e), Some(k_p)) => {
            if amortized.iter().any(Option::is_some) {
                return Err(Error::validation(
                    "storage",
                    "give either k_e/k_p or price_e/price_p/rate/lifetime/cycles_per_year, not both",
                ));
            }
            (k_e, k_p)
        }
        (None, None) => {
            let names = ["storage.price_e", "storage.price_p", "storage.rate", "storage.lifetime", "storage.cycles_per_year"];
            if let Some(i) = amortized.iter().position(Option::is_none) {
                return Err(Error::validation(names[i], "missing"));
            }
            let v: Vec<f64> = amortized.iter().map(|x| x.unwrap()).collect();
            amortized_capacity_prices(v[0], v[1], v[2], v[3], v[4])?
        }
        (None, Some(_)) => return Err(Error::validation("storage.k_e", "missing while k_p is set")),
        (Some(_), None) => return Err(Error::validation("storage.k_p", "missing while k_e is set")),
    };
    Ok(StorageParams {
        k_e,
        k_p,
        eta_ch: s.eta_ch,
        eta_dis: s.eta_dis,
        p_ch_max: s.p_ch_max.unwrap_or(s.p_g_max),
        p_dis_max: s.p_dis_max.unwrap_or(s.p_g_max),
        p_g_max: s.p_g_max,
    })
}

fn parse_err(path: &Path, line: u64, message: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), message: format!("line {line}: {message}") }
}

fn open_csv(path: &Path, required: &[&str]) -> Result<(csv::Reader<fs::File>, Vec<usize>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    let mut columns = Vec::with_capacity(required.len());
    for name in required {
        let idx = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::validation(*name, format!("missing column in {}", path.display())))?;
        columns.push(idx);
    }
    Ok((reader, columns))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| parse_err(path, line, format!("{name}: cannot parse `{raw}`")))
}

fn read_scenarios(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let (mut reader, cols) = open_csv(path, &["scenario_id", "probability"])?;
    let mut ids = Vec::new();
    let mut probs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[cols[0]].to_string();
        if ids.contains(&id) {
            return Err(Error::validation("scenario_id", format!("duplicate scenario {id}")));
        }
        probs.push(parse_field(path, line, "probability", &record[cols[1]])?);
        ids.push(id);
    }
    Ok((ids, probs))
}

type Cell = Option<(f64, f64)>;

fn read_profiles(path: &Path, scenario_ids: &[String]) -> Result<(Vec<BuildingProfile>, usize)> {
    let (mut reader, cols) = open_csv(path, &["building_id", "scenario_id", "period", "demand_kw", "renewable_kw"])?;
    let scenario_index: HashMap<&str, usize> =
        scenario_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, Vec<Vec<Cell>>> = HashMap::new();
    let mut periods = 0usize;

    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = record.position().map_or(0, |p| p.line());
        let building = record[cols[0]].to_string();
        let sid = &record[cols[1]];
        let w = *scenario_index.get(sid).ok_or_else(|| {
            Error::validation("scenario_id", format!("line {line}: scenario `{sid}` has no probability"))
        })?;
        let t: usize = parse_field(path, line, "period", &record[cols[2]])?;
        let d: f64 = parse_field(path, line, "demand_kw", &record[cols[3]])?;
        let r: f64 = parse_field(path, line, "renewable_kw", &record[cols[4]])?;
        let grid = cells.entry(building.clone()).or_insert_with(|| {
            order.push(building.clone());
            vec![Vec::new(); scenario_ids.len()]
        });
        let row = &mut grid[w];
        if row.len() <= t {
            row.resize(t + 1, None);
        }
        if row[t].replace((d, r)).is_some() {
            return Err(Error::validation(
                "period",
                format!("line {line}: duplicate row for building {building} scenario {sid} period {t}"),
            ));
        }
        periods = periods.max(t + 1);
    }
    if order.is_empty() {
        return Err(Error::validation("building_id", format!("no rows in {}", path.display())));
    }

    let mut buildings = Vec::with_capacity(order.len());
    for id in order {
        let grid = cells.remove(&id).expect("every ordered id has cells");
        let mut demand = Vec::with_capacity(grid.len());
        let mut renewable = Vec::with_capacity(grid.len());
        for (w, mut row) in grid.into_iter().enumerate() {
            row.resize(periods, None);
            if let Some(t) = row.iter().position(Option::is_none) {
                return Err(Error::validation(
                    "period",
                    format!("building {id} scenario {} is missing period {t}", scenario_ids[w]),
                ));
            }
            let (d, r): (Vec<f64>, Vec<f64>) = row.into_iter().map(|c| c.unwrap()).unzip();
            demand.push(d);
            renewable.push(r);
        }
        buildings.push(BuildingProfile { id, demand, renewable });
    }
    Ok((buildings, periods))
}

/// Config text that reloads to exactly `model`'s tariff, storage and options.
pub(super) fn to_config_text(model: &CommunityModel) -> Result<String> {
    let s = &model.storage;
    let config = ConfigFile {
        tariff: TariffSection {
            purchase: Some(model.tariff.purchase.clone()),
            tou_bands: None,
            sell: PriceSeries::PerPeriod(model.tariff.sell.clone()),
            demand_charge: model.tariff.demand_charge,
        },
        storage: StorageSection {
            k_e: Some(s.k_e),
            k_p: Some(s.k_p),
            eta_ch: s.eta_ch,
            eta_dis: s.eta_dis,
            p_ch_max: Some(s.p_ch_max),
            p_dis_max: Some(s.p_dis_max),
            p_g_max: s.p_g_max,
            ..StorageSection::default()
        },
        scenarios: ScenarioSection { probabilities_file: "scenarios.csv".into(), period_hours: model.scenarios.period_hours },
        options: OptionsSection {
            sharing_mode: model.options.sharing_mode,
            periodic_soc: model.options.periodic_soc,
            demand_charge_import_only: model.options.demand_charge_import_only,
        },
    };
    toml::to_string(&config).map_err(|e| Error::Internal(format!("config serialization: {e}")))
}

/// Default `profiles.csv` / `config.toml` locations inside a directory.
pub fn dir_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("profiles.csv"), dir.join("config.toml"))
}
