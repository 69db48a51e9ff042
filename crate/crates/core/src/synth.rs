//! Seeded synthetic communities built from daily building archetypes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BuildingProfile, CommunityModel, ConfigFile, ScenarioSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Office,
    Hotel,
    School,
    Hospital,
    Restaurant,
}

impl Archetype {
    pub const ALL: [Archetype; 5] =
        [Archetype::Office, Archetype::Hotel, Archetype::School, Archetype::Hospital, Archetype::Restaurant];

    /// Typical peak load range in kW.
    fn peak_range(self) -> (f64, f64) {
        match self {
            Archetype::Office => (40.0, 90.0),
            Archetype::Hotel => (30.0, 70.0),
            Archetype::School => (30.0, 70.0),
            Archetype::Hospital => (80.0, 150.0),
            Archetype::Restaurant => (15.0, 35.0),
        }
    }

    /// Load relative to peak at `hour`, on a working day or a quiet day.
    pub fn shape(self, hour: f64, quiet: bool) -> f64 {
        let within = |a: f64, b: f64| hour >= a && hour < b;
        match self {
            Archetype::Office if quiet => 0.3,
            Archetype::Office => {
                if within(8.0, 18.0) {
                    1.0
                } else if within(7.0, 8.0) || within(18.0, 20.0) {
                    0.6
                } else {
                    0.3
                }
            }
            Archetype::Hotel => {
                let f = if within(18.0, 23.0) {
                    1.0
                } else if within(6.0, 9.0) {
                    0.8
                } else if within(9.0, 18.0) {
                    0.45
                } else {
                    0.55
                };
                if quiet { f * 1.1 } else { f }
            }
            Archetype::School if quiet => 0.2,
            Archetype::School => {
                if within(7.0, 16.0) {
                    1.0
                } else if within(16.0, 18.0) {
                    0.5
                } else {
                    0.2
                }
            }
            Archetype::Hospital => {
                let f = if within(8.0, 20.0) { 1.0 } else { 0.75 };
                if quiet { f * 0.95 } else { f }
            }
            Archetype::Restaurant => {
                let f = if within(17.0, 22.0) {
                    1.0
                } else if within(11.0, 14.0) {
                    0.85
                } else if within(9.0, 23.0) {
                    0.4
                } else {
                    0.15
                };
                if quiet { f * 1.15 } else { f }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Renewable {
    Solar,
    Wind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub buildings: usize,
    pub scenarios: usize,
    /// Periods per day.
    pub periods: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { buildings: 5, scenarios: 3, periods: 24, seed: 1 }
    }
}

/// Archetype and renewable source of building `i`, cycling through the archetypes.
pub fn building_kind(i: usize) -> (Archetype, Renewable) {
    let archetype = Archetype::ALL[i % Archetype::ALL.len()];
    let renewable = if matches!(archetype, Archetype::Hotel | Archetype::Restaurant) { Renewable::Wind } else { Renewable::Solar };
    (archetype, renewable)
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Generates a community with the shipped default tariff and storage prices.
/// The same options always give the same community.
pub fn synthesize(opts: &SynthOptions) -> Result<CommunityModel> {
    if opts.buildings == 0 {
        return Err(Error::validation("buildings", "need at least one building"));
    }
    if opts.scenarios == 0 {
        return Err(Error::validation("scenarios", "need at least one scenario"));
    }
    if opts.periods == 0 || opts.periods > 24 * 60 {
        return Err(Error::validation("periods", format!("must be between 1 and 1440, got {}", opts.periods)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let periods = opts.periods;
    let dt = 24.0 / periods as f64;
    let n_scen = opts.scenarios;

    // about two quiet days a week
    let quiet_count = if n_scen >= 3 { (n_scen * 2).div_ceil(7) } else { 0 };
    let quiet = |w: usize| w >= n_scen - quiet_count;
    let mut weights: Vec<f64> = (0..n_scen)
        .map(|w| rng.gen_range(0.8..1.2) * if quiet(w) { 2.0 / quiet_count as f64 } else { 5.0 / (n_scen - quiet_count) as f64 })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|p| *p = round3(*p / total));
    let head: f64 = weights[..n_scen - 1].iter().sum();
    weights[n_scen - 1] = round3(1.0 - head);

    // weather shared by the whole community
    let sun: Vec<f64> = (0..n_scen).map(|_| rng.gen_range(0.35..1.0)).collect();
    let wind: Vec<Vec<f64>> = (0..n_scen)
        .map(|_| {
            let mut level: f64 = rng.gen_range(0.2..0.8);
            (0..periods)
                .map(|_| {
                    level = (level + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0);
                    level
                })
                .collect()
        })
        .collect();

    let mut buildings = Vec::with_capacity(opts.buildings);
    for i in 0..opts.buildings {
        let (archetype, source) = building_kind(i);
        let (lo, hi) = archetype.peak_range();
        let peak = rng.gen_range(lo..hi);
        let capacity = match source {
            Renewable::Solar => peak * rng.gen_range(0.3..0.9),
            Renewable::Wind => peak * rng.gen_range(0.1..0.35),
        };
        let mut demand = Vec::with_capacity(n_scen);
        let mut renewable = Vec::with_capacity(n_scen);
        for w in 0..n_scen {
            let level = rng.gen_range(0.85..1.15);
            let mut d = Vec::with_capacity(periods);
            let mut r = Vec::with_capacity(periods);
            for t in 0..periods {
                let hour = (t as f64 + 0.5) * dt;
                let noise = rng.gen_range(0.92..1.08);
                d.push(round3(peak * level * noise * archetype.shape(hour, quiet(w))));
                let g = match source {
                    Renewable::Solar if (6.0..18.0).contains(&hour) => {
                        sun[w] * (std::f64::consts::PI * (hour - 6.0) / 12.0).sin() * rng.gen_range(0.9..1.0)
                    }
                    Renewable::Solar => 0.0,
                    Renewable::Wind => wind[w][t],
                };
                r.push(round3(capacity * g));
            }
            demand.push(d);
            renewable.push(r);
        }
        buildings.push(BuildingProfile { id: format!("B{}", i + 1), demand, renewable });
    }

    let mut config = ConfigFile::shipped_default();
    config.scenarios.period_hours = dt;
    let scenarios = ScenarioSet {
        ids: (1..=n_scen).map(|w| format!("s{w}")).collect(),
        probabilities: weights,
        periods,
        period_hours: dt,
    };
    CommunityModel::new(buildings, scenarios, config.tariff(periods)?, config.storage_params()?, config.model_options())
}
