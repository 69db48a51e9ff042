use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    checked_solution, extract_primal, map_engine_error, solve_lp, EngineProblem, LinearProgram, LpSolution,
    MixedIntegerProgram, SolverError, INTEGRALITY_TOL,
};

/// Branch-and-bound settings.
#[derive(Clone, Debug)]
pub struct MilpOptions {
    /// Maximum number of nodes whose relaxation is branched on.
    pub node_limit: usize,
    /// A node is pruned when its bound is within this of the incumbent.
    pub prune_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { node_limit: 200_000, prune_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MilpStats {
    pub nodes: usize,
    pub relaxations: usize,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    solution: microlp::Solution,
}

// BinaryHeap is a max-heap: the "greatest" node is the one with the lowest
// bound, then the deepest, then the oldest.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

/// Solves a binary MILP to global optimality with default options.
pub fn solve_milp(problem: &MixedIntegerProgram) -> Result<LpSolution, SolverError> {
    solve_milp_with(problem, &MilpOptions::default()).map(|(sol, _)| sol)
}

/// Best-bound branch-and-bound on the most fractional binary.
///
/// Children are evaluated eagerly from a copy of the parent's factorised
/// basis, so each node's key is its own relaxation bound.
pub fn solve_milp_with(
    problem: &MixedIntegerProgram,
    options: &MilpOptions,
) -> Result<(LpSolution, MilpStats), SolverError> {
    problem.validate()?;
    if problem.binaries().is_empty() {
        return Ok((solve_lp(&problem.base)?, MilpStats::default()));
    }
    let lp = &problem.base;
    let Some(engine) = EngineProblem::build(lp)? else {
        return Ok((LpSolution::infeasible(), MilpStats::default()));
    };
    let mut stats = MilpStats::default();
    let root = match engine.problem.solve() {
        Ok(outcome) => outcome
            .into_solution()
            .map_err(|_| SolverError::Numerical("solve interrupted".into()))?,
        Err(e) => return map_engine_error(e).map(|s| (s, stats)),
    };
    stats.relaxations += 1;

    let mut search = Search {
        lp,
        binaries: problem.binaries(),
        vars: &engine.vars,
        heap: BinaryHeap::new(),
        incumbent: None,
        seq: 0,
        prune_tol: options.prune_tol,
    };
    search.consider(root, 0);

    while let Some(node) = search.heap.pop() {
        if search.dominated(node.bound) {
            continue;
        }
        stats.nodes += 1;
        if stats.nodes > options.node_limit {
            return Err(SolverError::NodeLimit { limit: options.node_limit });
        }
        let primal = extract_primal(lp, &engine.vars, &node.solution);
        let Some(branch) = search.most_fractional(&primal) else {
            // consider() only queues fractional nodes
            continue;
        };
        let var = engine.vars[branch];
        let down = node.solution.clone();
        for (parent, value) in [(down, 0.0), (node.solution, 1.0)] {
            stats.relaxations += 1;
            match parent.fix_var(var, value) {
                Ok(outcome) => {
                    let child = outcome
                        .into_solution()
                        .map_err(|_| SolverError::Numerical("solve interrupted".into()))?;
                    search.consider(child, node.depth + 1);
                }
                Err(microlp::Error::Infeasible) => {}
                Err(e) => return Err(SolverError::Numerical(e.to_string())),
            }
        }
    }

    match search.incumbent {
        Some((_, primal)) => Ok((checked_solution(lp, primal)?, stats)),
        None => Ok((LpSolution::infeasible(), stats)),
    }
}

struct Search<'a> {
    lp: &'a LinearProgram,
    binaries: &'a [usize],
    vars: &'a [microlp::Variable],
    heap: BinaryHeap<Node>,
    incumbent: Option<(f64, Vec<f64>)>,
    seq: usize,
    prune_tol: f64,
}

impl Search<'_> {
    fn dominated(&self, bound: f64) -> bool {
        matches!(&self.incumbent, Some((best, _)) if bound >= best - self.prune_tol)
    }

    fn consider(&mut self, solution: microlp::Solution, depth: usize) {
        let bound = solution.objective();
        if self.dominated(bound) {
            return;
        }
        let mut primal = extract_primal(self.lp, self.vars, &solution);
        if self.most_fractional(&primal).is_none() {
            for &j in self.binaries {
                primal[j] = primal[j].round();
            }
            let value = self.lp.objective_value(&primal);
            self.incumbent = Some((value, primal));
            return;
        }
        self.seq += 1;
        self.heap.push(Node { bound, depth, seq: self.seq, solution });
    }

    /// Binary farthest from integrality, lowest index on ties.
    fn most_fractional(&self, primal: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in self.binaries {
            let v = primal[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LpStatus, Relation};

    #[test]
    fn knapsack_of_size_one() {
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let a = mip.add_binary(-1.0);
        let b = mip.add_binary(-1.0);
        mip.base.add_row(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let sol = solve_milp(&mip).unwrap();
        assert!((sol.objective_value + 1.0).abs() < 1e-9);
        assert_eq!(sol.primal[a] + sol.primal[b], 1.0);
    }

    #[test]
    fn empty_mask_matches_lp_exactly() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-2.0, 0.0, 4.0);
        let y = lp.add_var(-3.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], Relation::Le, 7.5);
        lp.add_row(vec![(x, 3.0), (y, -1.0)], Relation::Ge, 0.5);
        let mip = MixedIntegerProgram::new(lp.clone());
        assert_eq!(solve_milp(&mip).unwrap(), solve_lp(&lp).unwrap());
    }

    #[test]
    fn relaxation_is_fractional_but_answer_integral() {
        // max 5a + 4b + 3c + d/2 over three knapsack rows with a continuous tail
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let a = mip.add_binary(-5.0);
        let b = mip.add_binary(-4.0);
        let c = mip.add_binary(-3.0);
        let d = mip.base.add_var(-0.5, 0.0, 1.5);
        mip.base.add_row(vec![(a, 2.0), (b, 3.0), (c, 1.0), (d, 1.0)], Relation::Le, 4.7);
        mip.base.add_row(vec![(a, 4.0), (b, 1.0), (c, 2.0)], Relation::Le, 11.0);
        mip.base.add_row(vec![(a, 3.0), (b, 4.0), (c, 2.0), (d, 2.0)], Relation::Le, 8.0);
        let sol = solve_milp(&mip).unwrap();
        // enumerate by hand: {a,c} uses 3 / 5 / 5 → d = min(1.5, 1.7, 1.5) = 1.5 → -8.75
        // {a,b}: 5 > 4.7 infeasible; {b,c}: 4 → d = .7, (8-6)/2=1 → -7.35
        assert!((sol.objective_value + 8.75).abs() < 1e-9, "{}", sol.objective_value);
        assert_eq!(sol.primal[b], 0.0);
    }

    #[test]
    fn infeasible_milp() {
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let a = mip.add_binary(1.0);
        let b = mip.add_binary(1.0);
        mip.base.add_row(vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.5);
        let sol = solve_milp(&mip).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn node_limit_is_an_error() {
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let vars: Vec<_> = (0..8).map(|_| mip.add_binary(-1.0)).collect();
        mip.base.add_row(vars.iter().map(|&v| (v, 2.0)).collect(), Relation::Le, 7.0);
        let opts = MilpOptions { node_limit: 1, ..MilpOptions::default() };
        assert_eq!(solve_milp_with(&mip, &opts).unwrap_err(), SolverError::NodeLimit { limit: 1 });
    }

    #[test]
    fn binary_bounds_are_validated() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 2.0);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.mark_binary(x);
        assert!(matches!(solve_milp(&mip), Err(SolverError::InvalidProblem(_))));
    }
}
