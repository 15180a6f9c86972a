use crate::model::{LpModel, Relation, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Where each column sat in the final basis. Indexes run over structural
/// variables first, then one logical per row. Used for warm starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column resting at zero.
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub statuses: Vec<BasisStatus>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Objective in the model's own sense; NaN unless optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals, as the rate of change of the objective per unit of rhs.
    /// Empty for branch-and-bound results.
    pub duals: Vec<f64>,
    /// `c_j - a_j^T y` per structural variable, same sign convention.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub basis: Option<Basis>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn without_point(status: Status, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations,
            nodes: 0,
            basis: None,
        }
    }

    /// Lagrangian dual objective rebuilt from `duals` and `reduced_costs`
    /// against the original model data. Equals the primal objective at a
    /// KKT point.
    pub fn dual_objective(&self, model: &LpModel) -> f64 {
        let mut total = model.objective().constant_term();
        for (c, &y) in model.constraints().iter().zip(&self.duals) {
            total += y * c.rhs;
        }
        for (v, &d) in model.vars().iter().zip(&self.reduced_costs) {
            let bound = match (model.sense(), d > 0.0) {
                (Sense::Minimize, true) | (Sense::Maximize, false) => v.lower,
                _ => v.upper,
            };
            if d != 0.0 {
                total += d * bound;
            }
        }
        total
    }

    /// Largest violation of dual sign conditions (0 at a KKT point).
    pub fn dual_infeasibility(&self, model: &LpModel) -> f64 {
        let flip = if model.sense() == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let mut worst: f64 = 0.0;
        for (c, &y) in model.constraints().iter().zip(&self.duals) {
            let y = y * flip;
            let bad = match c.relation {
                Relation::Le => y.max(0.0),
                Relation::Ge => (-y).max(0.0),
                Relation::Eq => 0.0,
            };
            worst = worst.max(bad);
        }
        for (v, &d) in model.vars().iter().zip(&self.reduced_costs) {
            let d = d * flip;
            if d > 0.0 && v.lower == f64::NEG_INFINITY {
                worst = worst.max(d);
            }
            if d < 0.0 && v.upper == f64::INFINITY {
                worst = worst.max(-d);
            }
        }
        worst
    }
}
