//! Canonical, diff-stable text form of an [`LpModel`].
//!
//! ```text
//! lpmodel 1 <min|max>
//! var <name> <C|B> <lower> <upper>          one per variable, index order
//! obj <constant> [<coef> <index>]...        omitted when empty and zero
//! con <name> <le|eq|ge> <rhs> [<coef> <index>]...
//! ```
//!
//! Terms are listed by ascending variable index. Numbers use the shortest
//! representation that parses back to the same `f64`; infinite bounds are
//! written `inf` / `-inf`. Lines starting with `#` and blank lines are
//! ignored by the parser.

use std::fmt::Write as _;

use crate::error::LpError;
use crate::model::{LinearExpr, LpModel, Relation, Sense, VarId, VarKind, Variable};

const MAGIC: &str = "lpmodel";
const VERSION: &str = "1";

fn num(out: &mut String, v: f64) {
    if v == f64::INFINITY {
        out.push_str("inf");
    } else if v == f64::NEG_INFINITY {
        out.push_str("-inf");
    } else {
        let _ = write!(out, "{v:?}");
    }
}

fn terms(out: &mut String, expr: &LinearExpr) {
    let mut sorted: Vec<(VarId, f64)> = expr.terms().to_vec();
    sorted.sort_by_key(|t| t.0);
    for (v, c) in sorted {
        out.push(' ');
        num(out, c);
        let _ = write!(out, " {}", v.0);
    }
}

pub fn canonical_dump(model: &LpModel) -> String {
    let mut out = String::new();
    let sense = match model.sense() {
        Sense::Minimize => "min",
        Sense::Maximize => "max",
    };
    let _ = writeln!(out, "{MAGIC} {VERSION} {sense}");
    for v in model.vars() {
        let kind = match v.kind {
            VarKind::Continuous => "C",
            VarKind::Binary => "B",
        };
        let _ = write!(out, "var {} {kind} ", v.name);
        num(&mut out, v.lower);
        out.push(' ');
        num(&mut out, v.upper);
        out.push('\n');
    }
    let obj = model.objective();
    if !obj.is_empty() || obj.constant_term() != 0.0 {
        out.push_str("obj ");
        num(&mut out, obj.constant_term());
        terms(&mut out, obj);
        out.push('\n');
    }
    for c in model.constraints() {
        let rel = match c.relation {
            Relation::Le => "le",
            Relation::Eq => "eq",
            Relation::Ge => "ge",
        };
        let _ = write!(out, "con {} {rel} ", c.name);
        num(&mut out, c.rhs);
        terms(&mut out, &c.expr);
        out.push('\n');
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> LpError {
    LpError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num(line: usize, tok: Option<&str>) -> Result<f64, LpError> {
    let tok = tok.ok_or_else(|| err(line, "missing number"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, format!("bad number {tok:?}")))?;
    if v.is_nan() {
        return Err(err(line, "NaN is not allowed"));
    }
    Ok(v)
}

fn parse_terms<'a>(
    line: usize,
    nvars: usize,
    mut toks: impl Iterator<Item = &'a str>,
) -> Result<LinearExpr, LpError> {
    let mut expr = LinearExpr::new();
    while let Some(c) = toks.next() {
        let coef = parse_num(line, Some(c))?;
        let idx_tok = toks.next().ok_or_else(|| err(line, "coefficient without variable"))?;
        let idx: usize = idx_tok
            .parse()
            .map_err(|_| err(line, format!("bad variable index {idx_tok:?}")))?;
        if idx >= nvars {
            return Err(err(line, format!("variable index {idx} not declared")));
        }
        expr.add_term(VarId(idx), coef);
    }
    Ok(expr)
}

/// Parses the canonical form back into a model.
pub fn parse_model(text: &str) -> Result<LpModel, LpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty document"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != MAGIC || h[1] != VERSION {
        return Err(err(hline, format!("expected header `{MAGIC} {VERSION} <min|max>`")));
    }
    let sense = match h[2] {
        "min" => Sense::Minimize,
        "max" => Sense::Maximize,
        other => return Err(err(hline, format!("unknown sense {other:?}"))),
    };
    let mut model = LpModel::new();
    let mut objective = LinearExpr::new();
    let mut seen_obj = false;
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("var") => {
                if seen_obj || model.num_constraints() > 0 {
                    return Err(err(ln, "variables must precede obj and con lines"));
                }
                let name = toks.next().ok_or_else(|| err(ln, "missing name"))?;
                let kind = match toks.next() {
                    Some("C") => VarKind::Continuous,
                    Some("B") => VarKind::Binary,
                    _ => return Err(err(ln, "kind must be C or B")),
                };
                let lower = parse_num(ln, toks.next())?;
                let upper = parse_num(ln, toks.next())?;
                if toks.next().is_some() {
                    return Err(err(ln, "trailing tokens"));
                }
                model.push_var(Variable {
                    name: name.to_string(),
                    lower,
                    upper,
                    kind,
                });
            }
            Some("obj") => {
                if seen_obj {
                    return Err(err(ln, "duplicate obj line"));
                }
                let constant = parse_num(ln, toks.next())?;
                objective = parse_terms(ln, model.num_vars(), toks)?;
                objective.add_constant(constant);
                seen_obj = true;
            }
            Some("con") => {
                let name = toks.next().ok_or_else(|| err(ln, "missing name"))?;
                let rel = match toks.next() {
                    Some("le") => Relation::Le,
                    Some("eq") => Relation::Eq,
                    Some("ge") => Relation::Ge,
                    _ => return Err(err(ln, "relation must be le, eq or ge")),
                };
                let rhs = parse_num(ln, toks.next())?;
                let expr = parse_terms(ln, model.num_vars(), toks)?;
                model.add_constraint(name, expr, rel, rhs);
            }
            Some(other) => return Err(err(ln, format!("unknown record {other:?}"))),
            None => unreachable!(),
        }
    }
    model.set_objective(objective, sense);
    Ok(model)
}
