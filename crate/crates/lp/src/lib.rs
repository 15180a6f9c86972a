//! Sparse LP/MILP modelling with an embedded solver.
//!
//! [`LpModel`] holds variables, rows and an objective. [`solve_lp`] runs a
//! bounded revised simplex; [`solve_milp`] wraps it in a depth-first
//! branch-and-bound for binary variables. Both sit behind the [`Solver`]
//! trait so an external engine can be swapped in.
//!
//! ```
//! use storage_risk_lp::{solve_lp, LpModel, Relation, Sense};
//!
//! let mut m = LpModel::new();
//! let x = m.add_var("x", 0.0, 10.0);
//! m.add_constraint("floor", x, Relation::Ge, 3.0);
//! m.set_objective(x, Sense::Minimize);
//! let sol = solve_lp(&m, 1e-7).unwrap();
//! assert!((sol.objective - 3.0).abs() < 1e-9);
//! ```

mod error;
mod lp_format;
mod lu;
mod milp;
mod model;
mod simplex;
mod solution;
mod text;

pub use error::LpError;
pub use lp_format::to_lp_format;
pub use milp::{BranchAndBound, MilpOptions};
pub use model::{Constraint, LinearExpr, LpModel, Relation, Sense, VarId, VarKind, Variable};
pub use simplex::{SimplexOptions, SimplexSolver};
pub use solution::{Basis, BasisStatus, Solution, Status};
pub use text::{canonical_dump, parse_model};

/// Anything that can solve an [`LpModel`], binaries included.
pub trait Solver: Send + Sync {
    fn solve(&self, model: &LpModel) -> Result<Solution, LpError>;

    /// Solve with a starting basis from a model of identical shape. The
    /// default ignores the hint.
    fn solve_warm(&self, model: &LpModel, _basis: Option<&Basis>) -> Result<Solution, LpError> {
        self.solve(model)
    }
}

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The embedded engine: simplex for pure LPs, branch-and-bound otherwise.
#[derive(Clone, Debug, Default)]
pub struct EmbeddedSolver {
    pub milp: MilpOptions,
}

impl EmbeddedSolver {
    pub fn new(tol: f64, gap: f64) -> Self {
        Self {
            milp: MilpOptions {
                gap,
                simplex: SimplexOptions::with_tolerance(tol),
                ..MilpOptions::default()
            },
        }
    }
}

impl Solver for EmbeddedSolver {
    fn solve(&self, model: &LpModel) -> Result<Solution, LpError> {
        self.solve_warm(model, None)
    }

    fn solve_warm(&self, model: &LpModel, basis: Option<&Basis>) -> Result<Solution, LpError> {
        if model.num_binaries() == 0 {
            SimplexSolver::new(self.milp.simplex.clone()).solve_relaxation(model, basis)
        } else {
            BranchAndBound::new(self.milp.clone()).solve(model)
        }
    }
}

/// Solves a continuous model; binaries are rejected as malformed.
pub fn solve_lp(model: &LpModel, tol: f64) -> Result<Solution, LpError> {
    SimplexSolver::new(SimplexOptions::with_tolerance(tol)).solve(model)
}

/// Solves a model with binary variables to within a relative `gap`.
pub fn solve_milp(model: &LpModel, tol: f64, gap: f64) -> Result<Solution, LpError> {
    EmbeddedSolver::new(tol, gap).solve(model)
}
