use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::game::CostGame;
use super::separation::VIOLATION_TOL;
use super::{coalition_sum, dsat, require_players, AllocationResult, Method, TraceAction, TraceRecord};
use crate::error::{Error, Result};
use crate::model::CoalitionKey;
use crate::solver::{solve_lp, LinearProgram, LpStatus, Relation};

/// A coalition whose excess is frozen at `level` in later rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub coalition: CoalitionKey,
    pub value: f64,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub x: Vec<f64>,
    pub z: f64,
}

#[derive(Clone, Debug)]
pub struct NucleolusOptions {
    /// Excess above the current level that counts as a violation.
    pub violation_tol: f64,
    /// Largest slack a coalition may show anywhere on the optimal face and still be frozen.
    pub binding_tol: f64,
    /// Per-coordinate spread below which the optimal face is a single point.
    pub uniqueness_tol: f64,
    /// Allowed gap between the search's coalition value and the directly solved one.
    pub agreement_tol: f64,
    /// How often the binding tolerance is tightened after an infeasible master.
    pub binding_retries: usize,
}

impl Default for NucleolusOptions {
    fn default() -> Self {
        Self {
            violation_tol: VIOLATION_TOL,
            binding_tol: 1e-6,
            uniqueness_tol: 1e-7,
            agreement_tol: 1e-5,
            binding_retries: 3,
        }
    }
}

/// Box for every `x_i`, far outside any allocation the game can produce.
///
/// The simplex engine can stall on free variables when the optimum is not
/// unique, so the master never leaves them free. A box this wide only shows
/// up as a huge range in the uniqueness and binding checks, which reject it.
fn x_box(grand: f64, free: &[(CoalitionKey, f64)], fixed: &[Binding]) -> f64 {
    let scale = grand.abs()
        + free.iter().map(|(_, v)| v.abs()).sum::<f64>()
        + fixed.iter().map(|b| b.value.abs() + b.level.abs()).sum::<f64>()
        + 1.0;
    1e3 * scale
}

/// Variables `x_0..x_{n-1}` then `z`; minimizes `z`.
fn master_lp(
    players: usize,
    grand: f64,
    free: &[(CoalitionKey, f64)],
    fixed: &[Binding],
    z_bounds: (f64, f64),
) -> LinearProgram {
    let bound = x_box(grand, free, fixed);
    let mut lp = LinearProgram::new();
    for _ in 0..players {
        lp.add_var(0.0, -bound, bound);
    }
    let z = lp.add_var(1.0, z_bounds.0, z_bounds.1);
    lp.add_row((0..players).map(|i| (i, 1.0)).collect(), Relation::Eq, grand);
    for (key, value) in free {
        let mut row: Vec<(usize, f64)> = key.members().map(|i| (i, 1.0)).collect();
        row.push((z, -1.0));
        lp.add_row(row, Relation::Le, *value);
    }
    for b in fixed {
        lp.add_row(b.coalition.members().map(|i| (i, 1.0)).collect(), Relation::Eq, b.value + b.level);
    }
    lp
}

fn solve_master_bounded(
    players: usize,
    grand: f64,
    free: &[(CoalitionKey, f64)],
    fixed: &[Binding],
    z_floor: f64,
) -> Result<Option<MasterSolution>> {
    let lp = master_lp(players, grand, free, fixed, (z_floor, f64::INFINITY));
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(MasterSolution { x: sol.primal[..players].to_vec(), z: sol.primal[players] })),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Internal("master problem is unbounded".into())),
    }
}

/// Minimizes the largest excess over `free` with `fixed` excesses held at their levels.
pub fn master_solve(
    players: usize,
    grand: f64,
    free: &[(CoalitionKey, f64)],
    fixed: &[Binding],
) -> Result<MasterSolution> {
    let floor = -10.0 * x_box(grand, free, fixed);
    solve_master_bounded(players, grand, free, fixed, floor)?
        .ok_or_else(|| Error::Internal("master problem is infeasible".into()))
}

/// The optimal face of the master: its constraints with `z` pinned at `z_star`.
fn face_lp(players: usize, grand: f64, free: &[(CoalitionKey, f64)], fixed: &[Binding], z_star: f64) -> LinearProgram {
    let slack = 1e-9 * z_star.abs().max(1.0);
    let mut lp = master_lp(players, grand, free, fixed, (z_star - slack, z_star + slack));
    lp.set_cost(players, 0.0);
    lp
}

/// Minimum of `sum_{i in S} x_i` over the face, `-inf` when unbounded.
fn min_over_face(face: &LinearProgram, players: usize, members: &[usize]) -> Result<(f64, Vec<f64>)> {
    let mut lp = face.clone();
    for &i in members {
        lp.set_cost(i, 1.0);
    }
    // z* carries the master's round-off, so a face pinned tightly around it
    // can come out empty; widen the window a few times before giving up
    for _ in 0..4 {
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => return Ok((sol.objective_value, sol.primal[..players].to_vec())),
            LpStatus::Unbounded => return Ok((f64::NEG_INFINITY, Vec::new())),
            LpStatus::Infeasible => {
                let (lo, hi) = lp.bounds(players);
                let w = hi - lo;
                lp.set_bounds(players, lo - 5.0 * w, hi + 5.0 * w);
            }
        }
    }
    Err(Error::Internal("optimal face of the master is empty".into()))
}

/// True when every `x_i` is pinned to within `tol` once `z = z_star`.
pub fn uniqueness_check(
    players: usize,
    grand: f64,
    free: &[(CoalitionKey, f64)],
    fixed: &[Binding],
    z_star: f64,
    tol: f64,
) -> Result<bool> {
    let face = face_lp(players, grand, free, fixed, z_star);
    let ranges: Vec<Result<f64>> = (0..players)
        .into_par_iter()
        .map(|i| {
            let mut lo = face.clone();
            lo.set_cost(i, 1.0);
            let mut hi = face.clone();
            hi.set_cost(i, -1.0);
            let (a, b) = (solve_lp(&lo)?, solve_lp(&hi)?);
            if !(a.is_optimal() && b.is_optimal()) {
                return Ok(f64::INFINITY);
            }
            Ok(-b.objective_value - a.objective_value)
        })
        .collect();
    for r in ranges {
        if r? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Row space spanned by the efficiency row and the frozen coalitions.
///
/// A coalition inside it has the same excess at every remaining candidate
/// point, so it can neither be frozen again nor compete in later rounds.
#[derive(Clone, Debug)]
struct Span {
    n: usize,
    /// Pivot column and row, each row zero at the pivots of the rows before it.
    basis: Vec<(usize, Vec<f64>)>,
}

impl Span {
    fn new(n: usize) -> Self {
        let mut span = Self { n, basis: Vec::new() };
        span.insert(&CoalitionKey::grand(n));
        span
    }

    fn reduce(&self, key: &CoalitionKey) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for i in key.members() {
            v[i] = 1.0;
        }
        for (p, row) in &self.basis {
            let f = v[*p];
            if f != 0.0 {
                v.iter_mut().zip(row).for_each(|(a, b)| *a -= f * b);
            }
        }
        v
    }

    fn contains(&self, key: &CoalitionKey) -> bool {
        self.reduce(key).iter().all(|a| a.abs() < 1e-9)
    }

    /// Adds `key` and returns true if it is independent of the rows so far.
    fn insert(&mut self, key: &CoalitionKey) -> bool {
        let v = self.reduce(key);
        let (p, &big) = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).expect("nonempty");
        if big.abs() < 1e-9 {
            return false;
        }
        self.basis.push((p, v.iter().map(|a| a / big).collect()));
        true
    }

    fn is_full(&self) -> bool {
        self.basis.len() == self.n
    }
}

struct BindingSearch {
    bound: Vec<usize>,
    /// A face point where every tight-but-unconfirmed candidate is slack.
    probe: Option<Vec<f64>>,
}

/// Free coalitions whose excess equals `z_star` everywhere on the optimal face.
fn identify_bindings(
    players: usize,
    grand: f64,
    free: &[(CoalitionKey, f64)],
    fixed: &[Binding],
    m: &MasterSolution,
    tol: f64,
) -> Result<BindingSearch> {
    let candidates: Vec<usize> = (0..free.len())
        .filter(|&j| (m.z - (coalition_sum(&m.x, &free[j].0) - free[j].1)).abs() <= tol)
        .collect();
    let face = face_lp(players, grand, free, fixed, m.z);
    let checked: Vec<Result<(usize, f64, Vec<f64>)>> = candidates
        .par_iter()
        .map(|&j| {
            let members: Vec<usize> = free[j].0.members().collect();
            let (min_sum, point) = min_over_face(&face, players, &members)?;
            // largest slack z* - e(S) anywhere on the face
            Ok((j, m.z + free[j].1 - min_sum, point))
        })
        .collect();
    let mut bound = Vec::new();
    let mut probe_points = Vec::new();
    for c in checked {
        let (j, max_slack, point) = c?;
        if max_slack <= tol {
            bound.push(j);
        } else if !point.is_empty() {
            probe_points.push(point);
        }
    }
    let probe = if bound.is_empty() {
        let mut p = m.x.clone();
        if !probe_points.is_empty() {
            let k = probe_points.len() as f64;
            for (i, pi) in p.iter_mut().enumerate() {
                *pi = probe_points.iter().map(|q| q[i]).sum::<f64>() / k;
            }
        }
        Some(p)
    } else {
        None
    };
    Ok(BindingSearch { bound, probe })
}

/// Nucleolus with default tolerances.
pub fn nucleolus<G: CostGame + ?Sized>(game: &G) -> Result<AllocationResult> {
    nucleolus_with(game, &NucleolusOptions::default())
}

/// Lexicographic excess minimization with violated coalitions generated on demand.
///
/// Each round solves a master over the coalitions seen so far, asks the game
/// for the most violated unseen coalition, and adds it. When none is violated
/// and the optimal point is not yet unique, the coalitions tight on the whole
/// optimal face are frozen at the round's level and the next round begins.
/// Uniqueness is checked only after the search comes back empty: with too few
/// coalitions the master can be unique yet wrong.
pub fn nucleolus_with<G: CostGame + ?Sized>(game: &G, opts: &NucleolusOptions) -> Result<AllocationResult> {
    let n = game.players();
    require_players(n)?;
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;
    let grand = game.value(&CoalitionKey::grand(n))?;
    let mut free: Vec<(CoalitionKey, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let key = CoalitionKey::singleton(n, i);
        let v = game.value(&key)?;
        free.push((key, v));
    }
    let mut fixed: Vec<Binding> = Vec::new();
    let mut span = Span::new(n);
    // coalitions whose excess is already determined by the frozen ones
    let mut settled: Vec<CoalitionKey> = Vec::new();
    let mut trace = Vec::new();
    let mut episode = 1usize;

    // The master only sees some coalitions, so z gets a floor well below any
    // attainable level; the floor is lowered if it ever binds without a violation.
    let scale = grand.abs() + free.iter().map(|(_, v)| v.abs()).sum::<f64>() + 1.0;
    let mut z_floor = -10.0 * scale;
    let max_iterations = if n < 40 { (1usize << n) * 4 + 64 } else { usize::MAX };

    let mut iterations = 0usize;
    let x = loop {
        iterations += 1;
        if iterations > max_iterations || (n < 60 && episode > 1usize << n) {
            return Err(Error::Internal(format!("nucleolus did not converge after {iterations} iterations")));
        }
        let m = solve_master_bounded(n, grand, &free, &fixed, z_floor)?
            .ok_or_else(|| Error::Internal("master problem is infeasible".into()))?;
        trace.push(TraceRecord { episode, action: TraceAction::Master, coalition: None, excess: None, z: m.z, wall_ms: elapsed() });

        if span.is_full() {
            break m.x;
        }

        let exclude: Vec<CoalitionKey> = free
            .iter()
            .map(|(k, _)| k.clone())
            .chain(fixed.iter().map(|b| b.coalition.clone()))
            .chain(settled.iter().cloned())
            .collect();
        let found = game.max_excess(&m.x, m.z, &exclude)?;
        if let Some(v) = found.as_ref().filter(|v| v.excess > opts.violation_tol) {
            if span.contains(&v.coalition) {
                settled.push(v.coalition.clone());
                continue;
            }
            let value = game.value(&v.coalition)?;
            if (value - v.value).abs() > opts.agreement_tol {
                return Err(Error::Internal(format!(
                    "coalition {}: violation search valued it at {} but solving it gives {}",
                    v.coalition, v.value, value
                )));
            }
            let excess = coalition_sum(&m.x, &v.coalition) - value - m.z;
            trace.push(TraceRecord {
                episode,
                action: TraceAction::Violate,
                coalition: Some(v.coalition.to_hex()),
                excess: Some(excess),
                z: m.z,
                wall_ms: elapsed(),
            });
            free.push((v.coalition.clone(), value));
            continue;
        }

        if m.z <= z_floor + 1e-9 * z_floor.abs() {
            z_floor *= 10.0;
            continue;
        }

        if uniqueness_check(n, grand, &free, &fixed, m.z, opts.uniqueness_tol)? {
            break m.x;
        }

        let mut tol = opts.binding_tol;
        let mut attempt = 0;
        loop {
            let search = identify_bindings(n, grand, &free, &fixed, &m, tol)?;
            if let Some(probe) = search.probe {
                // Nothing seen so far is tight on the whole face; look for an
                // unseen coalition that is tight at a point inside it.
                let hidden = game.max_excess(&probe, m.z, &exclude)?.filter(|v| v.excess >= -opts.binding_tol);
                let Some(v) = hidden else {
                    return Err(Error::Internal(format!("no binding coalition at level {}", m.z)));
                };
                if span.contains(&v.coalition) {
                    settled.push(v.coalition);
                    break;
                }
                let value = game.value(&v.coalition)?;
                trace.push(TraceRecord {
                    episode,
                    action: TraceAction::Violate,
                    coalition: Some(v.coalition.to_hex()),
                    excess: Some(coalition_sum(&probe, &v.coalition) - value - m.z),
                    z: m.z,
                    wall_ms: elapsed(),
                });
                free.push((v.coalition, value));
                break;
            }
            // Freeze only rows independent of those already frozen: a
            // dependent row is implied, and restating it with a rounded level
            // can make the equalities inconsistent.
            let mut next_span = span.clone();
            let mut next_fixed = fixed.clone();
            let mut next_settled = settled.clone();
            let mut frozen = Vec::new();
            for &j in &search.bound {
                let (key, value) = &free[j];
                if next_span.insert(key) {
                    next_fixed.push(Binding { coalition: key.clone(), value: *value, level: m.z });
                    frozen.push(j);
                } else {
                    next_settled.push(key.clone());
                }
            }
            let mut next_free = Vec::with_capacity(free.len());
            for (j, (key, value)) in free.iter().enumerate() {
                if search.bound.contains(&j) {
                    continue;
                }
                if next_span.contains(key) {
                    next_settled.push(key.clone());
                } else {
                    next_free.push((key.clone(), *value));
                }
            }
            if solve_master_bounded(n, grand, &next_free, &next_fixed, z_floor)?.is_none() {
                attempt += 1;
                if attempt > opts.binding_retries {
                    return Err(Error::Internal(format!("frozen coalitions at level {} are inconsistent", m.z)));
                }
                tol /= 10.0;
                continue;
            }
            for j in &frozen {
                trace.push(TraceRecord {
                    episode,
                    action: TraceAction::Bind,
                    coalition: Some(free[*j].0.to_hex()),
                    excess: None,
                    z: m.z,
                    wall_ms: elapsed(),
                });
            }
            free = next_free;
            fixed = next_fixed;
            settled = next_settled;
            span = next_span;
            episode += 1;
            break;
        }
    };

    if x.iter().any(|xi| xi.abs() >= 0.5 * x_box(grand, &free, &fixed)) {
        return Err(Error::Internal("nucleolus ran into the allocation box".into()));
    }
    let total: f64 = x.iter().sum();
    if (total - grand).abs() > 1e-6 * grand.abs().max(1.0) {
        return Err(Error::Internal(format!("nucleolus sums to {total}, grand coalition costs {grand}")));
    }
    let coalitions_queried = game.coalitions_queried();
    let dsat = dsat(game, &x)?;
    Ok(AllocationResult { method: Method::Nucleolus, allocation: x, dsat, episodes: episode, coalitions_queried, trace })
}
