//! Sparse linear program representation.
//!
//! Variables carry their own bounds and kind; constraints are
//! `expr (<=|=|>=) rhs` rows over a [`LinearExpr`]. Everything is held in
//! declaration order, which is also the order used by the solvers and the
//! text formats.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::LpError;

/// Index of a variable inside its [`LpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// Sparse affine expression `sum(coef * var) + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        Self {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (VarId, f64)>>(terms: I) -> Self {
        let mut expr = Self::new();
        for (v, c) in terms {
            expr.add_term(v, c);
        }
        expr
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// Adds `scale * other` to `self`.
    pub fn add_scaled(&mut self, other: &LinearExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += scale * other.constant;
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges duplicate variables, drops exact zeros and sorts by index.
    pub fn canonicalize(&mut self) {
        if self.terms.is_empty() {
            return;
        }
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        self.terms = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Evaluates the expression at `values` (indexed by variable).
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| c * values[v.0])
            .sum::<f64>()
            + self.constant
    }

    /// Rewrites every variable through `map`.
    pub fn remap(&self, mut map: impl FnMut(VarId) -> VarId) -> LinearExpr {
        LinearExpr {
            terms: self.terms.iter().map(|&(v, c)| (map(v), c)).collect(),
            constant: self.constant,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|&(v, _)| v)
    }
}

impl From<VarId> for LinearExpr {
    fn from(v: VarId) -> Self {
        LinearExpr::term(v, 1.0)
    }
}

impl From<f64> for LinearExpr {
    fn from(c: f64) -> Self {
        LinearExpr::constant(c)
    }
}

impl<T: Into<LinearExpr>> Add<T> for LinearExpr {
    type Output = LinearExpr;
    fn add(mut self, rhs: T) -> LinearExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinearExpr>> AddAssign<T> for LinearExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinearExpr>> Sub<T> for LinearExpr {
    type Output = LinearExpr;
    fn sub(mut self, rhs: T) -> LinearExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<LinearExpr>> SubAssign<T> for LinearExpr {
    fn sub_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.add_scaled(&rhs, -1.0);
    }
}

impl Mul<f64> for LinearExpr {
    type Output = LinearExpr;
    fn mul(mut self, rhs: f64) -> LinearExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Mul<f64> for VarId {
    type Output = LinearExpr;
    fn mul(self, rhs: f64) -> LinearExpr {
        LinearExpr::term(self, rhs)
    }
}

impl Mul<VarId> for f64 {
    type Output = LinearExpr;
    fn mul(self, rhs: VarId) -> LinearExpr {
        LinearExpr::term(rhs, self)
    }
}

impl Neg for LinearExpr {
    type Output = LinearExpr;
    fn neg(self) -> LinearExpr {
        self * -1.0
    }
}

impl<T: Into<LinearExpr>> Add<T> for VarId {
    type Output = LinearExpr;
    fn add(self, rhs: T) -> LinearExpr {
        LinearExpr::from(self) + rhs
    }
}

impl<T: Into<LinearExpr>> Sub<T> for VarId {
    type Output = LinearExpr;
    fn sub(self, rhs: T) -> LinearExpr {
        LinearExpr::from(self) - rhs
    }
}

impl std::iter::Sum for LinearExpr {
    fn sum<I: Iterator<Item = LinearExpr>>(iter: I) -> Self {
        let mut acc = LinearExpr::new();
        for e in iter {
            acc += e;
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A single row. The expression's constant term is folded into `rhs` when
/// the constraint is added to a model, so stored rows never carry one.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.expr.eval(values)
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: LinearExpr,
    sense: Sense,
}

impl Default for LpModel {
    fn default() -> Self {
        Self::new()
    }
}

impl LpModel {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: LinearExpr::new(),
            sense: Sense::Minimize,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        })
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        })
    }

    pub fn push_var(&mut self, var: Variable) -> VarId {
        self.vars.push(var);
        VarId(self.vars.len() - 1)
    }

    /// Adds `expr rel rhs`; any constant inside `expr` is moved to the rhs.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: impl Into<LinearExpr>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut expr = expr.into();
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        expr.canonicalize();
        self.constraints.push(Constraint {
            name: name.into(),
            expr,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, expr: impl Into<LinearExpr>, sense: Sense) {
        self.objective = expr.into().canonicalized();
        self.sense = sense;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.vars[id.0]
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[id.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinearExpr {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Structural checks: finite data, in-range references, sane bounds.
    pub fn validate(&self) -> Result<(), LpError> {
        for (j, v) in self.vars.iter().enumerate() {
            check_name(&v.name).map_err(|m| malformed(format!("variable {j}: {m}")))?;
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(malformed(format!("variable {} has NaN bound", v.name)));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(malformed(format!(
                    "variable {} has an infinite bound on the wrong side",
                    v.name
                )));
            }
            if v.lower > v.upper {
                return Err(malformed(format!(
                    "variable {} has lower {} > upper {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(malformed(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let n = self.vars.len();
        let check_expr = |expr: &LinearExpr, what: &str| -> Result<(), LpError> {
            for &(v, c) in expr.terms() {
                if v.0 >= n {
                    return Err(malformed(format!("{what} references unknown {v}")));
                }
                if !c.is_finite() {
                    return Err(malformed(format!("{what} has non-finite coefficient")));
                }
            }
            if !expr.constant.is_finite() {
                return Err(malformed(format!("{what} has non-finite constant")));
            }
            Ok(())
        };
        check_expr(&self.objective, "objective")?;
        for c in &self.constraints {
            check_name(&c.name)
                .map_err(|m| malformed(format!("constraint {}: {m}", c.name)))?;
            check_expr(&c.expr, &format!("constraint {}", c.name))?;
            if c.rhs.is_nan() || c.rhs.is_infinite() {
                return Err(malformed(format!("constraint {} has non-finite rhs", c.name)));
            }
        }
        Ok(())
    }

    /// Copy with every binary relaxed to a continuous variable on its bounds.
    pub fn relaxed(&self) -> LpModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

fn malformed(msg: String) -> LpError {
    LpError::MalformedModel(msg)
}

fn check_name(name: &str) -> Result<(), String> {
    if name.is_empty() {
        return Err("empty name".into());
    }
    if name.chars().any(|c| c.is_whitespace() || c == ':') {
        return Err(format!("name {name:?} contains whitespace or ':'"));
    }
    Ok(())
}
