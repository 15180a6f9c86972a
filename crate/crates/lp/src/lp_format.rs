//! Export to the CPLEX LP text format, for cross-checking with external
//! solvers. Names are sanitized and de-duplicated; the mapping is
//! positional so the exported file round-trips through any solver that
//! reports values by name.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::model::{LinearExpr, LpModel, Relation, Sense, VarKind};

fn sanitize(raw: &str, fallback: &str, taken: &mut HashSet<String>) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.!\"#$%&()/;?@'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
    {
        s.insert(0, '_');
    }
    if s.len() > 200 || !taken.insert(s.clone()) {
        s = fallback.to_string();
        taken.insert(s.clone());
    }
    s
}

fn write_expr(out: &mut String, expr: &LinearExpr, names: &[String]) {
    if expr.is_empty() {
        out.push_str(" 0 ");
        out.push_str(names.first().map(String::as_str).unwrap_or("_"));
        return;
    }
    for (k, &(v, c)) in expr.terms().iter().enumerate() {
        let sign = if c < 0.0 { '-' } else { '+' };
        if k > 0 || c < 0.0 {
            let _ = write!(out, " {sign}");
        }
        let _ = write!(out, " {:?} {}", c.abs(), names[v.0]);
        if (k + 1) % 8 == 0 {
            out.push_str("\n   ");
        }
    }
}

pub fn to_lp_format(model: &LpModel) -> String {
    let mut taken = HashSet::new();
    let vnames: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .map(|(j, v)| sanitize(&v.name, &format!("_x{j}"), &mut taken))
        .collect();
    let cnames: Vec<String> = model
        .constraints()
        .iter()
        .enumerate()
        .map(|(i, c)| sanitize(&c.name, &format!("_r{i}"), &mut taken))
        .collect();

    let mut out = String::new();
    out.push_str(match model.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_expr(&mut out, model.objective(), &vnames);
    let k = model.objective().constant_term();
    if k != 0.0 {
        let _ = write!(out, " {} {:?}", if k < 0.0 { '-' } else { '+' }, k.abs());
    }
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints().iter().zip(&cnames) {
        let _ = write!(out, " {name}:");
        write_expr(&mut out, &c.expr, &vnames);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {:?}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.vars().iter().zip(&vnames) {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {:?}", v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {:?} <= {name} <= {:?}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {:?}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {:?}", v.upper);
            }
        }
    }
    let bins: Vec<&String> = model
        .vars()
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}
