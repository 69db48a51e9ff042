use rayon::prelude::*;

use super::game::CostGame;
use super::{dsat, require_players, AllocationResult, Method};
use crate::error::{Error, Result};
use crate::model::CoalitionKey;

/// Largest community valued in full without an explicit override.
pub const DEFAULT_SHAPLEY_LIMIT: usize = 20;

/// `w[s] = s! (n - s - 1)! / n!`, the weight of joining a coalition of size `s`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    // w[0] = 1/n and w[s+1] = w[s] (s+1) / (n-s-1)
    let mut w = Vec::with_capacity(n);
    let mut cur = 1.0 / n as f64;
    for s in 0..n {
        w.push(cur);
        if s + 1 < n {
            cur *= (s + 1) as f64 / (n - s - 1) as f64;
        }
    }
    w
}

/// Average marginal cost over all join orders. Values every coalition, in parallel.
///
/// Refuses communities above `limit` buildings unless `force` is set.
pub fn shapley<G: CostGame + ?Sized>(game: &G, limit: usize, force: bool) -> Result<AllocationResult> {
    let n = game.players();
    require_players(n)?;
    if n > limit && !force {
        return Err(Error::TooManyPlayers { players: n, limit });
    }
    if n >= 40 {
        return Err(Error::TooManyPlayers { players: n, limit: 39 });
    }
    if n > limit {
        log::warn!("valuing all {} coalitions of a {n}-building community", (1u64 << n) - 1);
    }
    let masks: Vec<u64> = (1..1u64 << n).collect();
    let values: Vec<f64> = masks
        .par_iter()
        .map(|&m| game.value(&CoalitionKey::from_bits(n, m)))
        .collect::<Result<Vec<_>>>()?;
    let value = |m: u64| if m == 0 { 0.0 } else { values[m as usize - 1] };

    let weights = shapley_weights(n);
    let x: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1u64 << i;
            (0..1u64 << n)
                .filter(|m| m & bit == 0)
                .map(|m| weights[m.count_ones() as usize] * (value(m | bit) - value(m)))
                .sum()
        })
        .collect();

    let coalitions_queried = game.coalitions_queried();
    let dsat = dsat(game, &x)?;
    Ok(AllocationResult { method: Method::Shapley, allocation: x, dsat, episodes: 0, coalitions_queried, trace: Vec::new() })
}
