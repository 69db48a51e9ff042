//! Small dense LP solvers written independently of the library's solver:
//! a two-phase tableau simplex with Bland's rule and a brute-force vertex enumerator.

use ces_core::solver::{LinearProgram, MixedIntegerProgram, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// `min cost·x` over dense rows `a·x rel b` and bounds `lower ≤ x ≤ upper`.
#[derive(Clone, Debug)]
pub struct Lp {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Rel, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Optimal { x: Vec<f64>, obj: f64 },
    Infeasible,
    Unbounded,
}

impl Outcome {
    pub fn obj(&self) -> Option<f64> {
        match self {
            Outcome::Optimal { obj, .. } => Some(*obj),
            _ => None,
        }
    }

    pub fn x(&self) -> &[f64] {
        match self {
            Outcome::Optimal { x, .. } => x,
            _ => panic!("no optimal point: {self:?}"),
        }
    }
}

impl Lp {
    pub fn new(n: usize) -> Self {
        Self { cost: vec![0.0; n], lower: vec![0.0; n], upper: vec![f64::INFINITY; n], rows: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn add_free(&mut self) -> usize {
        self.cost.push(0.0);
        self.lower.push(f64::NEG_INFINITY);
        self.upper.push(f64::INFINITY);
        for r in &mut self.rows {
            r.0.push(0.0);
        }
        self.n() - 1
    }

    pub fn row(&mut self, a: Vec<f64>, rel: Rel, b: f64) {
        assert_eq!(a.len(), self.n());
        self.rows.push((a, rel, b));
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds = x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] - tol && v <= self.upper[j] + tol);
        bounds
            && self.rows.iter().all(|(a, rel, b)| {
                let act: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                let scale = b.abs().max(1.0);
                match rel {
                    Rel::Le => act <= b + tol * scale,
                    Rel::Ge => act >= b - tol * scale,
                    Rel::Eq => (act - b).abs() <= tol * scale,
                }
            })
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// The same problem in the library's representation.
    pub fn to_library(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for j in 0..self.n() {
            lp.add_var(self.cost[j], self.lower[j], self.upper[j]);
        }
        for (a, rel, b) in &self.rows {
            let coeffs = a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
            let rel = match rel {
                Rel::Le => Relation::Le,
                Rel::Eq => Relation::Eq,
                Rel::Ge => Relation::Ge,
            };
            lp.add_row(coeffs, rel, *b);
        }
        lp
    }

    pub fn to_library_mip(&self, binaries: &[usize]) -> MixedIntegerProgram {
        let mut mip = MixedIntegerProgram::new(self.to_library());
        for &j in binaries {
            mip.mark_binary(j);
        }
        mip
    }
}

/// How an original variable maps to nonnegative tableau columns.
enum Map {
    /// `x = offset + y`
    Shift(usize, f64),
    /// `x = offset - y`
    Flip(usize, f64),
    /// `x = y⁺ - y⁻`
    Split(usize, usize),
}

const EPS: f64 = 1e-10;

struct Tableau {
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule on the objective row. Returns false if unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        let m = self.basis.len();
        let rhs = self.cols;
        loop {
            let obj = &self.t[m];
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && obj[j] < -EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.t[r][enter];
                if a > EPS {
                    let ratio = self.t[r][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - EPS || (ratio <= best + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }
}

/// Two-phase dense simplex.
pub fn simplex(lp: &Lp) -> Outcome {
    let n = lp.n();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l > u + EPS {
            return Outcome::Infeasible;
        }
        if l.is_finite() {
            maps.push(Map::Shift(ncols, l));
            if u.is_finite() {
                extra_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(Map::Flip(ncols, u));
            ncols += 1;
        } else {
            maps.push(Map::Split(ncols, ncols + 1));
            ncols += 2;
        }
    }

    // rows over structural columns
    let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    for (a, rel, b) in &lp.rows {
        let mut coef = vec![0.0; ncols];
        let mut rhs = *b;
        for (j, &aj) in a.iter().enumerate() {
            match maps[j] {
                Map::Shift(c, off) => {
                    coef[c] += aj;
                    rhs -= aj * off;
                }
                Map::Flip(c, off) => {
                    coef[c] -= aj;
                    rhs -= aj * off;
                }
                Map::Split(p, q) => {
                    coef[p] += aj;
                    coef[q] -= aj;
                }
            }
        }
        rows.push((coef, *rel, rhs));
    }
    for (c, cap) in extra_rows {
        let mut coef = vec![0.0; ncols];
        coef[c] = 1.0;
        rows.push((coef, Rel::Le, cap));
    }
    let mut cost = vec![0.0; ncols];
    for (j, &cj) in lp.cost.iter().enumerate() {
        match maps[j] {
            Map::Shift(c, _) => cost[c] += cj,
            Map::Flip(c, _) => cost[c] -= cj,
            Map::Split(p, q) => {
                cost[p] += cj;
                cost[q] -= cj;
            }
        }
    }

    // normalize to nonnegative rhs
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
    }
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Rel::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Rel::Le).count();
    let first_slack = ncols;
    let first_art = ncols + slack_count;
    let cols = first_art + art_count;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let (mut s, mut a) = (first_slack, first_art);
    for (i, (coef, rel, b)) in rows.iter().enumerate() {
        t[i][..ncols].copy_from_slice(coef);
        t[i][cols] = *b;
        match rel {
            Rel::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Rel::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Rel::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };

    // phase one: minimize the sum of artificials
    if art_count > 0 {
        for i in 0..m {
            if tab.basis[i] >= first_art {
                for j in 0..=cols {
                    let v = tab.t[i][j];
                    tab.t[m][j] -= v;
                }
            }
        }
        for j in first_art..cols {
            tab.t[m][j] = 0.0;
        }
        tab.optimize(&|_| true);
        if -tab.t[m][cols] > 1e-7 * (1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max)) {
            return Outcome::Infeasible;
        }
        // drive artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] >= first_art {
                if let Some(j) = (0..first_art).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                } else {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
    }

    // phase two
    let m = tab.basis.len();
    let mut obj = vec![0.0; cols + 1];
    obj[..ncols].copy_from_slice(&cost);
    for i in 0..m {
        let cb = obj[tab.basis[i]];
        if cb != 0.0 {
            for j in 0..=cols {
                obj[j] -= cb * tab.t[i][j];
            }
        }
    }
    tab.t[m] = obj;
    if !tab.optimize(&|j| j < first_art) {
        return Outcome::Unbounded;
    }
    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[tab.basis[i]] = tab.t[i][cols];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            Map::Shift(c, off) => off + y[c],
            Map::Flip(c, off) => off - y[c],
            Map::Split(p, q) => y[p] - y[q],
        })
        .collect();
    let obj = lp.objective(&x);
    Outcome::Optimal { x, obj }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Optimum by trying every basic solution. Needs finite bounds on every variable.
pub fn vertex_enumeration(lp: &Lp) -> Outcome {
    let n = lp.n();
    assert!(lp.lower.iter().chain(&lp.upper).all(|v| v.is_finite()), "vertex enumeration needs a bounded box");
    if n == 0 {
        return if lp.feasible(&[], 1e-9) { Outcome::Optimal { x: vec![], obj: 0.0 } } else { Outcome::Infeasible };
    }
    let mut equalities = Vec::new();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, rel, b) in &lp.rows {
        if *rel == Rel::Eq {
            equalities.push((a.clone(), *b));
        } else {
            planes.push((a.clone(), *b));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    if equalities.len() > n {
        // keep only a maximal independent subset; the rest are checked for feasibility
        equalities.truncate(n);
    }
    let need = n - equalities.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(planes.len(), need, &mut |pick| {
        let mut a: Vec<Vec<f64>> = equalities.iter().map(|e| e.0.clone()).collect();
        let mut b: Vec<f64> = equalities.iter().map(|e| e.1).collect();
        for &p in pick {
            a.push(planes[p].0.clone());
            b.push(planes[p].1);
        }
        if let Some(x) = solve_square(a, b) {
            if lp.feasible(&x, 1e-9) {
                let obj = lp.objective(&x);
                if best.as_ref().is_none_or(|(bo, _)| obj < *bo) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((obj, x)) => Outcome::Optimal { x, obj },
        None => Outcome::Infeasible,
    }
}

/// Every binary assignment, with the remaining continuous part solved by vertex enumeration.
pub fn milp_by_enumeration(lp: &Lp, binaries: &[usize]) -> Outcome {
    let n = lp.n();
    let cont: Vec<usize> = (0..n).filter(|j| !binaries.contains(j)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << binaries.len()) {
        let fixed: Vec<f64> = (0..binaries.len()).map(|k| ((mask >> k) & 1) as f64).collect();
        let mut sub = Lp::new(cont.len());
        for (k, &j) in cont.iter().enumerate() {
            sub.cost[k] = lp.cost[j];
            sub.lower[k] = lp.lower[j];
            sub.upper[k] = lp.upper[j];
        }
        for (a, rel, b) in &lp.rows {
            let shift: f64 = binaries.iter().zip(&fixed).map(|(&j, v)| a[j] * v).sum();
            sub.rows.push((cont.iter().map(|&j| a[j]).collect(), *rel, b - shift));
        }
        if let Outcome::Optimal { x, obj } = vertex_enumeration(&sub) {
            let total = obj + binaries.iter().zip(&fixed).map(|(&j, v)| lp.cost[j] * v).sum::<f64>();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                let mut full = vec![0.0; n];
                for (k, &j) in cont.iter().enumerate() {
                    full[j] = x[k];
                }
                for (&j, v) in binaries.iter().zip(&fixed) {
                    full[j] = *v;
                }
                best = Some((total, full));
            }
        }
    }
    match best {
        Some((obj, x)) => Outcome::Optimal { x, obj },
        None => Outcome::Infeasible,
    }
}
