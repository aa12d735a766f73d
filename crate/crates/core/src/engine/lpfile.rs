//! CPLEX LP text format writer.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{LinExpr, ModelIR, QuadConstraint, Sense, VarId, VarKind};

const CONST_VAR: &str = "__const";

fn sanitize(raw: &str, used: &mut HashSet<String>, fallback: &str) -> String {
    let mut s: String = raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect();
    if !s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') || s.starts_with(['e', 'E']) {
        s = format!("{fallback}{s}");
    }
    let mut name = s.clone();
    let mut i = 1;
    while !used.insert(name.clone()) {
        name = format!("{s}_{i}");
        i += 1;
    }
    name
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn linear(out: &mut String, terms: &BTreeMap<usize, f64>, names: &[String]) {
    let mut first = true;
    for (&j, &c) in terms {
        if c == 0.0 {
            continue;
        }
        if first {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            out.push_str(if c < 0.0 { " -" } else { " +" });
        }
        let _ = write!(out, " {} {}", num(c.abs()), names[j]);
        first = false;
    }
    if first {
        out.push_str(" 0 ");
        out.push_str(CONST_VAR);
    }
}

fn collect(terms: &[(VarId, f64)]) -> BTreeMap<usize, f64> {
    let mut m = BTreeMap::new();
    for &(v, c) in terms {
        *m.entry(v.0).or_insert(0.0) += c;
    }
    m
}

fn quad_bracket(out: &mut String, q: &BTreeMap<(usize, usize), f64>, names: &[String]) {
    out.push_str(" + [");
    let mut first = true;
    for (&(i, j), &c) in q {
        if c == 0.0 {
            continue;
        }
        if first {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            out.push_str(if c < 0.0 { " -" } else { " +" });
        }
        if i == j {
            let _ = write!(out, " {} {} ^2", num(c.abs()), names[i]);
        } else {
            let _ = write!(out, " {} {} * {}", num(c.abs()), names[i], names[j]);
        }
        first = false;
    }
    out.push_str(" ]");
}

/// Expands a quadratic row into `[quadratic] + linear <= rhs`.
fn expand(q: &QuadConstraint) -> (BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>, f64) {
    let mut quad = BTreeMap::new();
    let mut lin = BTreeMap::new();
    let mut rhs = 0.0;
    let mut add_rhs_expr = |lin: &mut BTreeMap<usize, f64>, e: &LinExpr, s: f64| {
        for &(v, c) in &e.terms {
            *lin.entry(v.0).or_insert(0.0) -= s * c;
        }
        rhs += s * e.constant;
    };
    match q {
        QuadConstraint::Disc { p, q: qv, radius, scale, .. } => {
            *quad.entry((p.0, p.0)).or_insert(0.0) += 1.0;
            *quad.entry((qv.0, qv.0)).or_insert(0.0) += 1.0;
            add_rhs_expr(&mut lin, scale, radius * radius);
        }
        QuadConstraint::SumSquares { terms, rhs: r, .. } => {
            let mut constant = 0.0;
            for t in terms {
                let tt = collect(&t.terms);
                let items: Vec<_> = tt.into_iter().collect();
                for (a, &(i, ci)) in items.iter().enumerate() {
                    for &(j, cj) in &items[a..] {
                        let f = if i == j { 1.0 } else { 2.0 };
                        let key = (i.min(j), i.max(j));
                        *quad.entry(key).or_insert(0.0) += f * ci * cj;
                    }
                    *lin.entry(i).or_insert(0.0) += 2.0 * t.constant * ci;
                }
                constant += t.constant * t.constant;
            }
            add_rhs_expr(&mut lin, r, 1.0);
            rhs -= constant;
        }
    }
    (quad, lin, rhs)
}

/// Renders `model` in LP format. The objective constant is carried by a
/// variable fixed to 1.
pub fn write_lp(model: &ModelIR) -> String {
    let mut used = HashSet::new();
    used.insert(CONST_VAR.to_string());
    let names: Vec<String> = model.vars.iter().enumerate().map(|(j, v)| sanitize(&v.name, &mut used, &format!("v{j}_"))).collect();
    let mut out = String::new();
    out.push_str("\\ gridflood model\nMinimize\n obj:");
    let obj = collect(&model.objective);
    linear(&mut out, &obj, &names);
    let _ = writeln!(out, " + {} {CONST_VAR}", num(model.objective_constant));
    out.push_str("Subject To\n");
    let mut rused = HashSet::new();
    for (i, row) in model.rows.iter().enumerate() {
        let name = sanitize(&row.name, &mut rused, &format!("r{i}_"));
        let _ = write!(out, " {name}:");
        linear(&mut out, &collect(&row.coefs), &names);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(row.rhs));
    }
    for (i, q) in model.quads.iter().enumerate() {
        let name = sanitize(q.name(), &mut rused, &format!("q{i}_"));
        let (quad, lin, rhs) = expand(q);
        let _ = write!(out, " {name}:");
        linear(&mut out, &lin, &names);
        quad_bracket(&mut out, &quad, &names);
        let _ = writeln!(out, " <= {}", num(rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.vars.iter().zip(&names) {
        if v.lb == v.ub {
            let _ = writeln!(out, " {name} = {}", num(v.lb));
        } else if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(v.lb), num(v.ub));
        }
    }
    let _ = writeln!(out, " {CONST_VAR} = 1");
    let bins: Vec<&String> = model.vars.iter().zip(&names).filter(|(v, _)| v.kind == VarKind::Binary).map(|(_, n)| n).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &ModelIR, path: &Path) -> crate::Result<()> {
    std::fs::write(path, write_lp(model))?;
    Ok(())
}
