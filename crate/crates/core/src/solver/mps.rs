//! Fixed-column MPS writer.

use std::fmt::Write as _;

use super::{LinearModel, Sense};

fn num(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    let s = if s.is_empty() || s == "-" { "0" } else { s };
    if s.len() <= 12 {
        s.to_string()
    } else {
        format!("{v:.6e}")
    }
}

/// Renders `model` in fixed MPS. Names longer than 8 characters are replaced
/// by positional names (`C0000012`, `R0000003`).
pub fn to_mps(model: &LinearModel, name: &str) -> String {
    let col = |j: usize| {
        let n = &model.variables[j].name;
        if n.len() <= 8 && !n.contains(' ') {
            n.clone()
        } else {
            format!("C{j:07}")
        }
    };
    let row = |i: usize| {
        let n = &model.constraints[i].name;
        if n.len() <= 8 && !n.contains(' ') && n != "OBJ" {
            n.clone()
        } else {
            format!("R{i:07}")
        }
    };

    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", name.chars().take(8).collect::<String>());
    out.push_str("ROWS\n N  OBJ\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let t = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {t}  {}", row(i));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.coeffs {
            by_col[v.0].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, v) in model.variables.iter().enumerate() {
        if v.binary != in_int {
            let tag = if v.binary { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER                 'MARKER'                 {tag}");
            in_int = v.binary;
        }
        if v.cost != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col(j), "OBJ", num(v.cost));
        }
        for &(i, a) in &by_col[j] {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col(j), row(i), num(a));
        }
        if v.cost == 0.0 && by_col[j].is_empty() {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col(j), "OBJ", "0");
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER                 'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", "OBJ", num(-model.objective_offset));
    }
    for (i, c) in model.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", row(i), num(c.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for (j, v) in model.variables.iter().enumerate() {
        let c = col(j);
        if v.binary && v.lower == 0.0 && v.upper == 1.0 {
            let _ = writeln!(out, " BV BND       {c:<8}");
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " FX BND       {c:<8}  {:>12}", num(v.lower));
            }
            (false, false) => {
                let _ = writeln!(out, " FR BND       {c:<8}");
            }
            (lo, up) => {
                if !lo {
                    let _ = writeln!(out, " MI BND       {c:<8}");
                } else if v.lower != 0.0 {
                    let _ = writeln!(out, " LO BND       {c:<8}  {:>12}", num(v.lower));
                }
                if up {
                    let _ = writeln!(out, " UP BND       {c:<8}  {:>12}", num(v.upper));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
