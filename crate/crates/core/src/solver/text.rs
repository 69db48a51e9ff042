//! Plain-text problem dump.
//!
//! ```text
//! vars x y s
//! obj 1 -2 0
//! lb 0 0 0
//! ub inf 4 1
//! bin 2
//! 1 1 0 <= 3
//! 0 2 -1 = 1
//! ```
//!
//! One line per row, dense coefficients followed by the relation and rhs.
//! `bin` is only present for mixed-integer problems.

use std::fmt::Write;

use super::{LinearProgram, MixedIntegerProgram, Relation, SolverError};

pub(super) fn write_text(lp: &LinearProgram, binaries: &[usize]) -> String {
    let n = lp.num_vars();
    let mut out = String::new();
    let names: Vec<String> = (0..n)
        .map(|j| lp.name(j).map(str::to_owned).unwrap_or_else(|| format!("x{j}")))
        .collect();
    let _ = writeln!(out, "vars {}", names.join(" "));
    let _ = writeln!(out, "obj {}", join(lp.objective().iter().copied()));
    let _ = writeln!(out, "lb {}", join((0..n).map(|j| lp.bounds(j).0)));
    let _ = writeln!(out, "ub {}", join((0..n).map(|j| lp.bounds(j).1)));
    if !binaries.is_empty() {
        let idx: Vec<String> = binaries.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(out, "bin {}", idx.join(" "));
    }
    for row in lp.rows() {
        let mut dense = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            dense[j] = a;
        }
        let _ = writeln!(out, "{} {} {}", join(dense.into_iter()), row.relation, fmt_num(row.rhs));
    }
    out
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_num).collect::<Vec<_>>().join(" ")
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, SolverError> {
    match tok {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| SolverError::Parse { line, message: format!("bad number `{tok}`") }),
    }
}

/// Parses the dump format back into a problem. Binary markers, if any, are
/// applied to the returned [`MixedIntegerProgram`].
pub fn parse_text(text: &str) -> Result<MixedIntegerProgram, SolverError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> Result<(usize, Vec<String>), SolverError> {
        let (no, line) = lines.next().ok_or(SolverError::Parse { line: 0, message: format!("missing `{key}` line") })?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(SolverError::Parse { line: no, message: format!("expected `{key}`") });
        }
        Ok((no, toks.map(str::to_owned).collect()))
    };
    let (_, names) = header("vars")?;
    let n = names.len();
    let mut vectors = Vec::new();
    for key in ["obj", "lb", "ub"] {
        let (no, toks) = header(key)?;
        if toks.len() != n {
            return Err(SolverError::Parse { line: no, message: format!("`{key}` needs {n} values") });
        }
        vectors.push(toks.iter().map(|t| parse_num(t, no)).collect::<Result<Vec<_>, _>>()?);
    }
    let mut lp = LinearProgram::new();
    for (j, name) in names.into_iter().enumerate() {
        lp.add_named_var(name, vectors[0][j], vectors[1][j], vectors[2][j]);
    }
    let mut binaries = Vec::new();
    for (no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() == Some(&"bin") {
            for t in &toks[1..] {
                binaries.push(t.parse::<usize>().map_err(|_| SolverError::Parse {
                    line: no,
                    message: format!("bad binary index `{t}`"),
                })?);
            }
            continue;
        }
        if toks.len() != n + 2 {
            return Err(SolverError::Parse { line: no, message: format!("row needs {n} coefficients, relation, rhs") });
        }
        let relation = match toks[n] {
            "<=" => Relation::Le,
            "=" => Relation::Eq,
            ">=" => Relation::Ge,
            other => return Err(SolverError::Parse { line: no, message: format!("bad relation `{other}`") }),
        };
        let mut coeffs = Vec::new();
        for (j, t) in toks[..n].iter().enumerate() {
            let a = parse_num(t, no)?;
            if a != 0.0 {
                coeffs.push((j, a));
            }
        }
        lp.add_row(coeffs, relation, parse_num(toks[n + 1], no)?);
    }
    let mut mip = MixedIntegerProgram::new(lp);
    for j in binaries {
        mip.mark_binary(j);
    }
    Ok(mip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_lp, solve_milp};

    #[test]
    fn dump_and_parse() {
        let mut mip = MixedIntegerProgram::new(LinearProgram::new());
        let x = mip.base.add_named_var("x", 1.0, 0.0, f64::INFINITY);
        let y = mip.base.add_named_var("y", -2.0, f64::NEG_INFINITY, 4.0);
        let s = mip.add_binary(0.5);
        mip.base.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Le, 3.0);
        mip.base.add_row(vec![(y, 2.0), (s, -1.0)], Relation::Eq, 0.1);
        let text = mip.to_text();
        assert!(text.starts_with("vars x y x2\n"));
        assert!(text.contains("\n1 1 0 <= 3\n"));
        let back = parse_text(&text).unwrap();
        assert_eq!(back.base.num_rows(), 2);
        assert_eq!(back.binaries(), &[2]);
        assert_eq!(back.base.bounds(1), (f64::NEG_INFINITY, 4.0));
        assert_eq!(solve_milp(&back).unwrap().objective_value, solve_milp(&mip).unwrap().objective_value);
    }

    #[test]
    fn parses_committed_fixture() {
        let text = include_str!("../../../../fixtures/lp/two_var.txt");
        let mip = parse_text(text).unwrap();
        let sol = solve_lp(&mip.base).unwrap();
        assert!((sol.objective_value + 2.6).abs() < 1e-9, "{}", sol.objective_value);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_text("vars a\nobj 1\nlb 0\nub inf\n1 << 2\n").unwrap_err();
        assert_eq!(err, SolverError::Parse { line: 5, message: "bad relation `<<`".into() });
    }
}
