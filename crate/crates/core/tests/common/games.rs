//! Reference computations on explicit cost games, using only the dense solvers in `lp.rs`.

use rand::Rng;

use super::lp::{simplex, Lp, Outcome, Rel};

/// `v[mask]` for every coalition mask, `v[0] = 0`.
pub type Values = Vec<f64>;

pub fn sum_over(x: &[f64], mask: usize) -> f64 {
    (0..x.len()).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).sum()
}

fn indicator(n: usize, mask: usize) -> Vec<f64> {
    (0..n).map(|i| (mask >> i & 1) as f64).collect()
}

/// Random integer cost game, subadditive over every split of every coalition.
pub fn random_subadditive(rng: &mut impl Rng, n: usize) -> Values {
    let full = (1usize << n) - 1;
    let mut v = vec![0.0; full + 1];
    let mut order: Vec<usize> = (1..=full).collect();
    order.sort_by_key(|m| m.count_ones());
    for s in order {
        if s.count_ones() == 1 {
            v[s] = rng.gen_range(5..=30) as f64;
            continue;
        }
        // cheapest way to form s from two disjoint parts
        let mut cap = f64::INFINITY;
        let mut a = (s - 1) & s;
        while a > 0 {
            let b = s ^ a;
            if a < b {
                cap = cap.min(v[a] + v[b]);
            }
            a = (a - 1) & s;
        }
        let saving = rng.gen_range(0..=(cap * 0.25) as i64) as f64;
        v[s] = (cap - saving).max(1.0);
    }
    v
}

pub fn is_subadditive(v: &Values, n: usize) -> bool {
    let full = (1usize << n) - 1;
    (1..=full).all(|s| {
        let mut a = (s - 1) & s;
        while a > 0 {
            if v[s] > v[a] + v[s ^ a] + 1e-9 {
                return false;
            }
            a = (a - 1) & s;
        }
        true
    })
}

/// Excess `x(S) - v(S)` for every proper coalition, indexed by mask.
pub fn excesses(v: &Values, x: &[f64]) -> Vec<(usize, f64)> {
    let full = (1usize << x.len()) - 1;
    (1..full).map(|s| (s, sum_over(x, s) - v[s])).collect()
}

pub fn max_excess(v: &Values, x: &[f64]) -> f64 {
    excesses(v, x).into_iter().map(|(_, e)| e).fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest uniform bound on the excesses of efficient allocations. The core is
/// nonempty exactly when this is nonpositive.
pub fn least_core_value(v: &Values, n: usize) -> f64 {
    let full = (1usize << n) - 1;
    let mut lp = Lp::new(0);
    for _ in 0..=n {
        lp.add_free();
    }
    lp.cost[n] = 1.0;
    let mut eff = indicator(n, full);
    eff.push(0.0);
    lp.row(eff, Rel::Eq, v[full]);
    for s in 1..full {
        let mut a = indicator(n, s);
        a.push(-1.0);
        lp.row(a, Rel::Le, v[s]);
    }
    simplex(&lp).obj().expect("least core LP has an optimum")
}

/// Rank of 0/1 coalition vectors by Gaussian elimination.
fn rank_of(n: usize, masks: &[usize]) -> usize {
    let mut m: Vec<Vec<f64>> = masks.iter().map(|&s| indicator(n, s)).collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..m.len()).find(|&r| m[r][col].abs() > 1e-9) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank {
                let f = m[r][col] / m[rank][col];
                if f != 0.0 {
                    let pivot = m[rank].clone();
                    m[r].iter_mut().zip(&pivot).for_each(|(a, b)| *a -= f * b);
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Clone)]
struct Rank {
    n: usize,
    masks: Vec<usize>,
}

impl Rank {
    fn spans(&self, mask: usize) -> bool {
        let mut with = self.masks.clone();
        with.push(mask);
        rank_of(self.n, &with) == rank_of(self.n, &self.masks)
    }

    fn add(&mut self, mask: usize) -> bool {
        if self.spans(mask) {
            return false;
        }
        self.masks.push(mask);
        true
    }
}

/// Prenucleolus by the textbook sequence of LPs over every proper coalition.
///
/// Each round minimizes the largest excess among unsettled coalitions, settles
/// every coalition whose excess is the same at all optimal points, and drops
/// those whose excess is then determined.
pub fn prenucleolus(v: &Values, n: usize) -> Vec<f64> {
    let full = (1usize << n) - 1;
    let mut rank = Rank { n, masks: Vec::new() };
    rank.add(full);
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    let mut free: Vec<usize> = (1..full).collect();

    let base = |fixed: &[(usize, f64)]| {
        let mut lp = Lp::new(0);
        for _ in 0..=n {
            lp.add_free();
        }
        let mut eff = indicator(n, full);
        eff.push(0.0);
        lp.row(eff, Rel::Eq, v[full]);
        for &(s, level) in fixed {
            let mut a = indicator(n, s);
            a.push(0.0);
            lp.row(a, Rel::Eq, v[s] + level);
        }
        lp
    };

    while !free.is_empty() {
        let mut lp = base(&fixed);
        lp.cost[n] = 1.0;
        for &s in &free {
            let mut a = indicator(n, s);
            a.push(-1.0);
            lp.row(a, Rel::Le, v[s]);
        }
        let t_star = simplex(&lp).obj().expect("round LP has an optimum");

        // the optimal face: same rows with t held at its optimum
        let mut face = lp.clone();
        face.cost[n] = 0.0;
        face.upper[n] = t_star + 1e-9 * t_star.abs().max(1.0);
        let mut settled = Vec::new();
        for &s in &free {
            let mut probe = face.clone();
            for i in 0..n {
                probe.cost[i] = (s >> i & 1) as f64;
            }
            let min_sum = simplex(&probe).obj().expect("face is nonempty and bounded");
            if min_sum - v[s] >= t_star - 1e-7 {
                settled.push(s);
            }
        }
        assert!(!settled.is_empty(), "no coalition settles at level {t_star}");
        for &s in &settled {
            if rank.add(s) {
                fixed.push((s, t_star));
            }
        }
        free.retain(|&s| !settled.contains(&s) && !rank.spans(s));
    }

    let lp = base(&fixed);
    simplex(&lp).x()[..n].to_vec()
}

/// True when every collection of coalitions with excess at or above some
/// attained level is balanced, which characterizes the prenucleolus.
pub fn kohlberg_holds(v: &Values, x: &[f64], tol: f64) -> bool {
    let n = x.len();
    let ex = excesses(v, x);
    let mut levels: Vec<f64> = ex.iter().map(|(_, e)| *e).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup_by(|a, b| (*a - *b).abs() <= tol);
    levels.iter().all(|&level| {
        let members: Vec<usize> = ex.iter().filter(|(_, e)| *e >= level - tol).map(|(s, _)| *s).collect();
        balanced(n, &members)
    })
}

/// Positive weights on `coalitions` whose weighted indicators sum to the all-ones vector.
pub fn balanced(n: usize, coalitions: &[usize]) -> bool {
    // weights at least one, summing to a common multiple mu of the all-ones vector
    let k = coalitions.len();
    let mut lp = Lp::new(k);
    for j in 0..k {
        lp.lower[j] = 1.0;
    }
    lp.add_free();
    for i in 0..n {
        let mut a: Vec<f64> = coalitions.iter().map(|s| (s >> i & 1) as f64).collect();
        a.push(-1.0);
        lp.row(a, Rel::Eq, 0.0);
    }
    !matches!(simplex(&lp), Outcome::Infeasible)
}
