#![allow(dead_code)]

pub mod games;
pub mod lp;

use std::path::{Path, PathBuf};

use rand::Rng;

use ces_core::model::{dir_paths, load_community};
use ces_core::{CommunityModel, TableGame};

use lp::{Lp, Rel};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn community(name: &str) -> CommunityModel {
    let (profiles, config) = dir_paths(&fixture(name));
    load_community(&profiles, &config).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn table_game(name: &str) -> TableGame {
    TableGame::from_csv(&fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Values by mask, read back out of a table game.
pub fn values_of(game: &TableGame) -> games::Values {
    use ces_core::CostGame;
    let n = game.players();
    (0..1u64 << n).map(|m| if m == 0 { 0.0 } else { game.raw(m) }).collect()
}

pub fn table_from_values(n: usize, v: &games::Values) -> TableGame {
    TableGame::new(n, v.clone()).expect("valid table")
}

/// Bounded random LP with integer data; usually feasible, sometimes not.
pub fn random_lp(rng: &mut impl Rng) -> Lp {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=5);
    let mut lp = Lp::new(n);
    for j in 0..n {
        lp.cost[j] = rng.gen_range(-6..=6) as f64;
        lp.lower[j] = rng.gen_range(-5..=0) as f64;
        lp.upper[j] = rng.gen_range(1..=6) as f64;
    }
    let point: Vec<f64> = (0..n).map(|j| rng.gen_range(lp.lower[j]..=lp.upper[j])).collect();
    let infeasible = rng.gen_bool(0.1);
    let mut has_eq = false;
    for r in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
        let act: f64 = a.iter().zip(&point).map(|(p, q)| p * q).sum();
        let rel = match rng.gen_range(0..5) {
            0 if !has_eq => {
                has_eq = true;
                Rel::Eq
            }
            1 | 2 => Rel::Ge,
            _ => Rel::Le,
        };
        let slack = rng.gen_range(0.0..3.0);
        let mut b = match rel {
            Rel::Le => act + slack,
            Rel::Ge => act - slack,
            Rel::Eq => act,
        };
        if infeasible && r == 0 {
            // a row no point of the box can meet
            let reach: f64 = a.iter().enumerate().map(|(j, aj)| (aj * lp.lower[j]).max(aj * lp.upper[j])).sum();
            let low: f64 = a.iter().enumerate().map(|(j, aj)| (aj * lp.lower[j]).min(aj * lp.upper[j])).sum();
            b = match rel {
                Rel::Le => low - 1.0,
                _ => reach + 1.0,
            };
        }
        lp.row(a, rel, b);
    }
    lp
}

/// Random binary program with up to 12 binaries and up to two bounded continuous variables.
pub fn random_milp(rng: &mut impl Rng) -> (Lp, Vec<usize>) {
    let nb = rng.gen_range(4..=12);
    let nc = rng.gen_range(0..=2);
    let n = nb + nc;
    let mut lp = Lp::new(n);
    for j in 0..n {
        lp.cost[j] = rng.gen_range(-10..=10) as f64;
        lp.lower[j] = 0.0;
        lp.upper[j] = if j < nb { 1.0 } else { rng.gen_range(1..=5) as f64 };
    }
    let point: Vec<f64> = (0..n)
        .map(|j| if j < nb { rng.gen_range(0..=1) as f64 } else { rng.gen_range(0.0..=lp.upper[j]) })
        .collect();
    for _ in 0..rng.gen_range(2..=5) {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-4..=6) as f64).collect();
        let act: f64 = a.iter().zip(&point).map(|(p, q)| p * q).sum();
        if rng.gen_bool(0.7) {
            lp.row(a, Rel::Le, act + rng.gen_range(0..=3) as f64);
        } else {
            lp.row(a, Rel::Ge, act - rng.gen_range(0..=3) as f64);
        }
    }
    (lp, (0..nb).collect())
}
