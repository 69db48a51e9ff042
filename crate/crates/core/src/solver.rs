//! Linear and binary mixed-integer programming.
//!
//! Problems are described in a small canonical form ([`LinearProgram`],
//! [`MixedIntegerProgram`]) that is validated, row-equilibrated and handed to
//! a sparse simplex engine. Binary programs are solved exactly by
//! branch-and-bound over LP relaxations, re-optimising each child from its
//! parent's basis.

mod bnb;
mod text;

use std::fmt;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::{solve_milp, solve_milp_with, MilpOptions, MilpStats};
pub use text::parse_text;

/// Maximum absolute row violation accepted on an optimal point (rows scaled
/// to unit max-abs coefficient).
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Objective tolerance used when comparing optima.
pub const OPTIMALITY_TOL: f64 = 1e-7;
/// Distance from 0/1 under which a relaxed binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Wall-clock budget for one simplex run. The engine can stall on problems
/// with free variables and a non-unique optimum, so callers keep every
/// variable boxed; this is the backstop.
pub const ENGINE_TIME_LIMIT: std::time::Duration = std::time::Duration::from_secs(300);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("branch-and-bound node limit of {limit} exceeded")]
    NodeLimit { limit: usize },
    #[error("numerical failure in LP engine: {0}")]
    Numerical(String),
    #[error("problem text line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    fn to_microlp(self) -> ComparisonOp {
        match self {
            Relation::Le => ComparisonOp::Le,
            Relation::Eq => ComparisonOp::Eq,
            Relation::Ge => ComparisonOp::Ge,
        }
    }

    /// Amount by which `activity` violates `activity <rel> rhs` (0 if satisfied).
    pub fn violation(self, activity: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => (activity - rhs).max(0.0),
            Relation::Ge => (rhs - activity).max(0.0),
            Relation::Eq => (activity - rhs).abs(),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A sparse constraint row `coeffs · x <relation> rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, &(_, a)| m.max(a.abs()))
    }
}

/// Minimise `objective · x` subject to rows and per-variable bounds.
///
/// Variables default to `[0, +inf)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<Option<String>>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with the given cost and bounds, returning its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(None);
        self.objective.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        let j = self.add_var(cost, lower, upper);
        self.names[j] = Some(name.into());
        j
    }

    /// Adds `coeffs · x <relation> rhs`, returning the row index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn name(&self, var: usize) -> Option<&str> {
        self.names[var].as_deref()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.activity(x)).collect()
    }

    /// Largest violation over rows and variable bounds, each relative to the
    /// magnitude of the terms involved once that exceeds one.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.rows {
            let v = row.relation.violation(row.activity(x), row.rhs);
            let size = row.coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).fold(row.rhs.abs(), f64::max);
            worst = worst.max(v / size.max(1.0));
        }
        for (j, &v) in x.iter().enumerate() {
            let size = v.abs().max(1.0);
            worst = worst.max((self.lower[j] - v) / size).max((v - self.upper[j]) / size);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolverError::InvalidProblem(format!("objective coefficient of var {j} is {c}")));
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(SolverError::InvalidProblem(format!("var {j} has bounds [{lo}, {hi}]")));
            }
            if lo > hi {
                return Err(SolverError::InvalidProblem(format!("var {j} has lower {lo} > upper {hi}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::InvalidProblem(format!("row {i} has rhs {}", row.rhs)));
            }
            let mut seen = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(SolverError::InvalidProblem(format!(
                        "row {i} references var {j} but only {n} vars exist"
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidProblem(format!("row {i} coefficient of var {j} is {a}")));
                }
                seen.push(j);
            }
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(SolverError::InvalidProblem(format!("row {i} repeats a variable")));
            }
        }
        Ok(())
    }

    /// Writes the problem in the plain-text dump format (see [`parse_text`]).
    pub fn to_text(&self) -> String {
        text::write_text(self, &[])
    }
}

/// A [`LinearProgram`] with some variables restricted to `{0, 1}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub base: LinearProgram,
    binaries: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(base: LinearProgram) -> Self {
        Self { base, binaries: Vec::new() }
    }

    /// Adds a binary variable with the given cost.
    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.base.add_var(cost, 0.0, 1.0);
        self.binaries.push(j);
        j
    }

    /// Marks an existing variable as binary.
    pub fn mark_binary(&mut self, var: usize) {
        if !self.binaries.contains(&var) {
            self.binaries.push(var);
            self.binaries.sort_unstable();
        }
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.base.validate()?;
        for &j in &self.binaries {
            if j >= self.base.num_vars() {
                return Err(SolverError::InvalidProblem(format!("binary index {j} out of range")));
            }
            let (lo, hi) = self.base.bounds(j);
            if lo < 0.0 || hi > 1.0 {
                return Err(SolverError::InvalidProblem(format!(
                    "binary var {j} has bounds [{lo}, {hi}] outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        text::write_text(&self.base, &self.binaries)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`] or [`solve_milp`].
///
/// For non-optimal statuses `primal` and `row_activities` are empty and the
/// objective is `+inf` (infeasible) or `-inf` (unbounded).
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub row_activities: Vec<f64>,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            objective_value: f64::INFINITY,
            primal: Vec::new(),
            row_activities: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            objective_value: f64::NEG_INFINITY,
            primal: Vec::new(),
            row_activities: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `problem` to optimality, or reports infeasibility/unboundedness.
pub fn solve_lp(problem: &LinearProgram) -> Result<LpSolution, SolverError> {
    problem.validate()?;
    let engine = EngineProblem::build(problem)?;
    let Some(engine) = engine else {
        return Ok(LpSolution::infeasible());
    };
    match engine.problem.solve() {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => finish(problem, &engine.vars, &sol),
            Err(_) => Err(SolverError::Numerical(format!("simplex gave up after {ENGINE_TIME_LIMIT:?}"))),
        },
        Err(e) => map_engine_error(e),
    }
}

fn map_engine_error(e: microlp::Error) -> Result<LpSolution, SolverError> {
    match e {
        microlp::Error::Infeasible => Ok(LpSolution::infeasible()),
        microlp::Error::Unbounded => Ok(LpSolution::unbounded()),
        other => Err(SolverError::Numerical(other.to_string())),
    }
}

/// The problem as handed to the simplex engine, rows equilibrated.
pub(crate) struct EngineProblem {
    pub(crate) problem: Problem,
    pub(crate) vars: Vec<Variable>,
}

impl EngineProblem {
    /// Returns `None` when an all-zero row is trivially violated.
    pub(crate) fn build(lp: &LinearProgram) -> Result<Option<Self>, SolverError> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        problem.set_time_limit(ENGINE_TIME_LIMIT);
        let vars: Vec<Variable> = (0..lp.num_vars())
            .map(|j| problem.add_var(lp.objective[j], (lp.lower[j], lp.upper[j])))
            .collect();
        for row in &lp.rows {
            let scale = row.max_abs_coeff();
            if scale == 0.0 {
                if row.relation.violation(0.0, row.rhs) > FEASIBILITY_TOL {
                    return Ok(None);
                }
                continue;
            }
            let mut expr = LinearExpr::empty();
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    expr.add(vars[j], a / scale);
                }
            }
            problem.add_constraint(expr, row.relation.to_microlp(), row.rhs / scale);
        }
        Ok(Some(Self { problem, vars }))
    }
}

/// Extracts, clamps and checks a primal point from an engine solution.
pub(crate) fn finish(
    lp: &LinearProgram,
    vars: &[Variable],
    sol: &microlp::Solution,
) -> Result<LpSolution, SolverError> {
    let primal = extract_primal(lp, vars, sol);
    checked_solution(lp, primal)
}

pub(crate) fn extract_primal(lp: &LinearProgram, vars: &[Variable], sol: &microlp::Solution) -> Vec<f64> {
    vars.iter()
        .enumerate()
        .map(|(j, &v)| sol.var_value_raw(v).clamp(lp.lower[j], lp.upper[j]))
        .collect()
}

pub(crate) fn checked_solution(lp: &LinearProgram, primal: Vec<f64>) -> Result<LpSolution, SolverError> {
    let violation = lp.max_violation(&primal);
    if violation > FEASIBILITY_TOL {
        return Err(SolverError::Numerical(format!(
            "optimal point violates constraints by {violation:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_value(&primal),
        row_activities: lp.row_activities(&primal),
        primal,
    })
}
