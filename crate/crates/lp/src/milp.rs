//! Depth-first branch-and-bound over LP relaxations.

use crate::error::LpError;
use crate::model::{LpModel, Relation, Sense, VarId, VarKind};
use crate::simplex::{SimplexOptions, SimplexSolver};
use crate::solution::{Basis, Solution, Status};

#[derive(Clone, Debug)]
pub struct MilpOptions {
    /// Relative optimality gap at which a node is pruned.
    pub gap: f64,
    /// Distance from 0/1 still counted as integral.
    pub integrality_tol: f64,
    pub node_limit: usize,
    pub simplex: SimplexOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            integrality_tol: 1e-6,
            node_limit: 200_000,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BranchAndBound {
    pub options: MilpOptions,
}

struct Node {
    fixes: Vec<(usize, f64)>,
    bound: f64,
    basis: Option<Basis>,
}

struct Incumbent {
    value: f64,
    sol: Solution,
}

impl BranchAndBound {
    pub fn new(options: MilpOptions) -> Self {
        Self { options }
    }

    pub fn solve(&self, model: &LpModel) -> Result<Solution, LpError> {
        model.validate()?;
        let lp = SimplexSolver::new(self.options.simplex.clone());
        let binaries: Vec<usize> = model
            .vars()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
            .collect();
        if binaries.is_empty() {
            return lp.solve_relaxation(model, None);
        }
        // Minimization view of objective values.
        let sign = if model.sense() == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let mut work = model.clone();
        let base: Vec<(f64, f64)> = binaries
            .iter()
            .map(|&j| (model.vars()[j].lower, model.vars()[j].upper))
            .collect();

        let mut slot = vec![usize::MAX; model.num_vars()];
        for (k, &j) in binaries.iter().enumerate() {
            slot[j] = k;
        }
        let mut rows_of: Vec<Vec<(usize, f64)>> = vec![Vec::new(); binaries.len()];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in c.expr.terms() {
                if slot[v.0] != usize::MAX {
                    rows_of[slot[v.0]].push((i, a));
                }
            }
        }

        let mut iterations = 0usize;
        let mut nodes = 0usize;
        let mut best: Option<Incumbent> = None;
        let mut stack = vec![Node {
            fixes: Vec::new(),
            bound: f64::NEG_INFINITY,
            basis: None,
        }];

        while let Some(node) = stack.pop() {
            if let Some(inc) = &best {
                if !self.worth_exploring(node.bound, inc.value) {
                    continue;
                }
            }
            if nodes >= self.options.node_limit {
                return Err(LpError::NodeLimitExceeded {
                    limit: self.options.node_limit,
                    incumbent: best.map(|b| Box::new(finish(b.sol, iterations, nodes))),
                });
            }
            nodes += 1;

            apply_fixes(&mut work, &binaries, &base, &node.fixes);
            let sol = lp.solve_relaxation(&work, node.basis.as_ref())?;
            iterations += sol.iterations;
            match sol.status {
                Status::Infeasible => continue,
                Status::Unbounded => {
                    if nodes == 1 {
                        let mut s = Solution::without_point(Status::Unbounded, iterations);
                        s.nodes = nodes;
                        return Ok(s);
                    }
                    continue;
                }
                Status::Optimal => {}
            }
            let value = sign * sol.objective;
            if let Some(inc) = &best {
                if !self.worth_exploring(value, inc.value) {
                    continue;
                }
            }

            let frac = self.most_fractional(&binaries, &sol.values);
            let Some(branch_var) = frac else {
                if best.as_ref().is_none_or(|b| value < b.value) {
                    best = Some(Incumbent { value, sol });
                }
                continue;
            };

            let mut candidates = Vec::new();
            if let Some(fixes) = self.activity_rounding(model, &rows_of, &binaries, &sol.values) {
                apply_fixes(&mut work, &binaries, &base, &fixes);
                let c = lp.solve_relaxation(&work, sol.basis.as_ref())?;
                if c.is_optimal() {
                    candidates.push(c);
                } else {
                    iterations += c.iterations;
                }
            }
            if nodes == 1 {
                candidates.extend(self.rounding_heuristics(&lp, &mut work, &binaries, &base, &sol)?);
            }
            if !candidates.is_empty() {
                for candidate in candidates {
                    iterations += candidate.iterations;
                    let v = sign * candidate.objective;
                    if best.as_ref().is_none_or(|b| v < b.value) {
                        best = Some(Incumbent {
                            value: v,
                            sol: candidate,
                        });
                    }
                }
                if let Some(inc) = &best {
                    if !self.worth_exploring(value, inc.value) {
                        continue;
                    }
                }
            }

            let x = sol.values[branch_var];
            let (near, far) = if x >= 0.5 { (1.0, 0.0) } else { (0.0, 1.0) };
            for side in [far, near] {
                let mut fixes = node.fixes.clone();
                fixes.push((branch_var, side));
                stack.push(Node {
                    fixes,
                    bound: value,
                    basis: sol.basis.clone(),
                });
            }
        }

        match best {
            Some(b) => {
                let sol = self.polish(&lp, &mut work, &binaries, &base, b.sol)?;
                Ok(finish(sol, iterations, nodes))
            }
            None => {
                let mut s = Solution::without_point(Status::Infeasible, iterations);
                s.nodes = nodes;
                Ok(s)
            }
        }
    }

    /// Re-solves with every binary fixed at its rounded value so that the
    /// returned point is exactly integral, not just within tolerance.
    fn polish(
        &self,
        lp: &SimplexSolver,
        work: &mut LpModel,
        binaries: &[usize],
        base: &[(f64, f64)],
        sol: Solution,
    ) -> Result<Solution, LpError> {
        if binaries.iter().all(|&j| sol.values[j] == sol.values[j].round()) {
            return Ok(sol);
        }
        let fixes: Vec<(usize, f64)> = binaries.iter().map(|&j| (j, sol.values[j].round())).collect();
        apply_fixes(work, binaries, base, &fixes);
        let polished = lp.solve_relaxation(work, sol.basis.as_ref())?;
        if polished.is_optimal() {
            return Ok(polished);
        }
        let mut snapped = sol;
        for &j in binaries {
            snapped.values[j] = snapped.values[j].round();
        }
        Ok(snapped)
    }

    /// Rounds the binaries one at a time, each in a direction that keeps
    /// every row it touches satisfied with all other values held at the
    /// relaxation point. Returns the fixings if every binary could be
    /// rounded.
    fn activity_rounding(
        &self,
        model: &LpModel,
        rows_of: &[Vec<(usize, f64)>],
        binaries: &[usize],
        values: &[f64],
    ) -> Option<Vec<(usize, f64)>> {
        let rows = model.constraints();
        let mut act: Vec<f64> = rows.iter().map(|c| c.activity(values)).collect();
        let mut x: Vec<f64> = binaries.iter().map(|&j| values[j]).collect();
        let mut pending: Vec<usize> = (0..binaries.len()).collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|&k| {
                let x0 = x[k];
                let near = x0.round().clamp(0.0, 1.0);
                for cand in [near, 1.0 - near] {
                    let delta = cand - x0;
                    let fits = rows_of[k].iter().all(|&(i, a)| {
                        let c = &rows[i];
                        let gap = |v: f64| match c.relation {
                            Relation::Le => (v - c.rhs).max(0.0),
                            Relation::Ge => (c.rhs - v).max(0.0),
                            Relation::Eq => (v - c.rhs).abs(),
                        };
                        let after = gap(act[i] + a * delta);
                        after <= 1e-9 * (1.0 + c.rhs.abs()) || after <= gap(act[i])
                    });
                    if fits {
                        for &(i, a) in &rows_of[k] {
                            act[i] += a * delta;
                        }
                        x[k] = cand;
                        return false;
                    }
                }
                true
            });
            if pending.len() == before {
                return None;
            }
        }
        Some(binaries.iter().zip(x).map(|(&j, v)| (j, v)).collect())
    }

    fn worth_exploring(&self, bound: f64, incumbent: f64) -> bool {
        bound < incumbent - self.options.gap * incumbent.abs().max(1.0)
    }

    fn most_fractional(&self, binaries: &[usize], values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in binaries {
            let f = (values[j] - values[j].round()).abs();
            if f > self.options.integrality_tol && best.is_none_or(|(_, bf)| f > bf) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Fix every binary to a rounded value and re-solve the continuous part.
    fn rounding_heuristics(
        &self,
        lp: &SimplexSolver,
        work: &mut LpModel,
        binaries: &[usize],
        base: &[(f64, f64)],
        relaxed: &Solution,
    ) -> Result<Vec<Solution>, LpError> {
        let tol = self.options.integrality_tol;
        let roundings: [&dyn Fn(f64) -> f64; 2] = [
            &|v| if v > tol { 1.0 } else { 0.0 },
            &|v| v.round(),
        ];
        let mut out = Vec::new();
        for round in roundings {
            let fixes: Vec<(usize, f64)> = binaries
                .iter()
                .map(|&j| (j, round(relaxed.values[j])))
                .collect();
            apply_fixes(work, binaries, base, &fixes);
            let sol = lp.solve_relaxation(work, relaxed.basis.as_ref())?;
            if sol.is_optimal() {
                out.push(sol);
            }
        }
        Ok(out)
    }
}

fn apply_fixes(work: &mut LpModel, binaries: &[usize], base: &[(f64, f64)], fixes: &[(usize, f64)]) {
    for (&j, &(lo, up)) in binaries.iter().zip(base) {
        work.set_bounds(VarId(j), lo, up);
    }
    for &(j, v) in fixes {
        work.set_bounds(VarId(j), v, v);
    }
}

fn finish(mut sol: Solution, iterations: usize, nodes: usize) -> Solution {
    sol.iterations = iterations;
    sol.nodes = nodes;
    sol.duals.clear();
    sol.reduced_costs.clear();
    sol.basis = None;
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Relation;

    #[test]
    fn small_knapsack() {
        // values 10, 13, 7 ; weights 4, 6, 3 ; capacity 9 -> pick 1 and 3? 10+7=17 w7; 13+7=20 w9
        let mut m = LpModel::new();
        let x: Vec<VarId> = (0..3).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_constraint(
            "cap",
            x[0] * 4.0 + x[1] * 6.0 + x[2] * 3.0,
            Relation::Le,
            9.0,
        );
        m.set_objective(x[0] * 10.0 + x[1] * 13.0 + x[2] * 7.0, Sense::Maximize);
        let s = BranchAndBound::default().solve(&m).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.values, vec![0.0, 1.0, 1.0]);
        assert!((s.objective - 20.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut m = LpModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("half", a + b, Relation::Eq, 1.0);
        m.add_constraint("diff", a - b, Relation::Eq, 0.0);
        m.set_objective(a, Sense::Minimize);
        let s = BranchAndBound::default().solve(&m).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let mut m = LpModel::new();
        let xs: Vec<VarId> = (0..12).map(|i| m.add_binary(format!("x{i}"))).collect();
        let w = [3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0];
        let cap: LinearExpr = xs.iter().zip(w).map(|(&x, wi)| x * wi).sum();
        m.add_constraint("cap", cap, Relation::Le, 30.5);
        let obj: LinearExpr = xs.iter().zip(w).map(|(&x, wi)| x * (wi + 0.1)).sum();
        m.set_objective(obj, Sense::Maximize);
        let opts = MilpOptions {
            node_limit: 2,
            ..MilpOptions::default()
        };
        match BranchAndBound::new(opts).solve(&m) {
            Err(LpError::NodeLimitExceeded { limit, .. }) => assert_eq!(limit, 2),
            Ok(s) => assert!(s.is_optimal()),
            Err(e) => panic!("{e}"),
        }
    }

    use crate::model::LinearExpr;
}
