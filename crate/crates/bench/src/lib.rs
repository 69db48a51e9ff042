//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use ces_core::model::{dir_paths, load_community};
use ces_core::{CoalitionKey, CommunityModel, TableGame};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// One of the committed synthetic communities.
pub fn community(name: &str) -> CommunityModel {
    let (profiles, config) = dir_paths(&fixture_dir(name));
    load_community(&profiles, &config).expect("fixture loads")
}

/// Deterministic subadditive game: each coalition pays its members' costs less a
/// discount that grows with its size.
pub fn discount_game(players: usize) -> TableGame {
    TableGame::from_fn(players, |k: &CoalitionKey| {
        let base: f64 = k.members().map(|i| 10.0 + ((i * 7) % 5) as f64).sum();
        base - (k.len() as f64 - 1.0).max(0.0).sqrt() * 3.0
    })
    .expect("valid game")
}
