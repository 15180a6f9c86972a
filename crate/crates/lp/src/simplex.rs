//! Bounded primal revised simplex.
//!
//! The model is brought to computational form `A x - r = 0` where every
//! row gets a logical `r_i` carrying the row bounds. A cold start begins
//! from the all-logical basis after a triangular crash has swapped
//! structurals in for equality-row logicals. Phase 1 minimizes the sum of
//! bound violations of basic variables (composite method, no
//! artificials); phase 2 uses the real costs. Pricing uses Devex reference
//! weights on the scaled problem, with reduced costs updated from the pivot
//! row; the ratio test is Harris two-pass.
//!
//! Stalling on a degenerate vertex is handled first by widening all bounds
//! by small random amounts, which are removed again once the perturbed
//! problem is solved. A second stall falls back to Bland's rule until the
//! solver makes progress.

use crate::error::LpError;
use crate::lu::{BasisColumn, CscMatrix, Eta, LuFactors};
use crate::model::{LpModel, Relation, Sense, VarKind};
use crate::solution::{Basis, BasisStatus, Solution, Status};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance, relative to `1 + |bound|`.
    pub feasibility_tol: f64,
    /// Dual feasibility tolerance on scaled reduced costs.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    /// Defaults to `20 * (rows + cols) + 10_000`.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub scale: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            pivot_tol: 1e-9,
            max_iterations: None,
            refactor_interval: 100,
            bland_after: 60,
            scale: true,
        }
    }
}

impl SimplexOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            feasibility_tol: tol,
            optimality_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl SimplexSolver {
    pub fn new(options: SimplexOptions) -> Self {
        Self { options }
    }

    /// Solves a purely continuous model.
    pub fn solve(&self, model: &LpModel) -> Result<Solution, LpError> {
        if model.num_binaries() > 0 {
            return Err(LpError::MalformedModel(
                "binary variables present; use the branch-and-bound solver".into(),
            ));
        }
        self.solve_relaxation(model, None)
    }

    /// Solves the continuous relaxation (binary kinds are ignored), optionally
    /// starting from a previous basis of a model with the same shape.
    pub fn solve_relaxation(
        &self,
        model: &LpModel,
        warm: Option<&Basis>,
    ) -> Result<Solution, LpError> {
        model.validate()?;
        let mut engine = Engine::new(model, &self.options);
        match warm {
            Some(b) => engine.load_basis(b),
            None => engine.crash(),
        }
        let outcome = engine.run()?;
        Ok(engine.into_solution(model, outcome))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum St {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

enum Step {
    Flip(f64),
    Pivot {
        pos: usize,
        theta: f64,
        to_upper: bool,
    },
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

struct Engine<'o> {
    opts: &'o SimplexOptions,
    m: usize,
    n: usize,
    a: CscMatrix,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    ftol: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,

    x: Vec<f64>,
    stat: Vec<St>,
    head: Vec<usize>,
    lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,

    // scratch
    rhs: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
    h: Vec<f64>,
    cb: Vec<f64>,
    neg_unit_idx: Vec<usize>,
    weights: Vec<f64>,
    rho: Vec<f64>,
    cwork: Vec<f64>,
    /// Row-wise copy of `a` for computing pivot rows from sparse `rho`.
    at: CscMatrix,
    row: Vec<f64>,
    row_nz: Vec<usize>,
    /// Reduced costs, kept current across pivots; `ceff` holds the costs
    /// they were computed from.
    d: Vec<f64>,
    ceff: Vec<f64>,
    d_valid: bool,

    iterations: usize,
    phase1: bool,
    /// Original bounds while a perturbation is active.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    perturbed_once: bool,
}

impl<'o> Engine<'o> {
    fn new(model: &LpModel, opts: &'o SimplexOptions) -> Self {
        let m = model.num_constraints();
        let n = model.num_vars();

        // CSC of A.
        let mut counts = vec![0usize; n + 1];
        for c in model.constraints() {
            for &(v, _) in c.expr.terms() {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut idx = vec![0usize; nnz];
        let mut val = vec![0.0f64; nnz];
        let mut fill = counts.clone();
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, coef) in c.expr.terms() {
                let p = fill[v.0];
                idx[p] = i;
                val[p] = coef;
                fill[v.0] += 1;
            }
        }
        let mut a = CscMatrix {
            start: counts,
            idx,
            val,
        };

        let (row_scale, col_scale) = if opts.scale {
            scale_factors(&a, m)
        } else {
            (vec![1.0; m], vec![1.0; n])
        };
        for j in 0..n {
            let s = col_scale[j];
            for p in a.start[j]..a.start[j + 1] {
                a.val[p] *= row_scale[a.idx[p]] * s;
            }
        }

        let at = transpose(&a, m);

        let sign = if model.sense() == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let mut cost = vec![0.0; n + m];
        for &(v, c) in model.objective().terms() {
            cost[v.0] += sign * c * col_scale[v.0];
        }
        let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let cost_scale = if cmax > 0.0 { pow2(1.0 / cmax) } else { 1.0 };
        for c in &mut cost {
            *c *= cost_scale;
        }

        let mut lo = vec![0.0; n + m];
        let mut up = vec![0.0; n + m];
        for (j, v) in model.vars().iter().enumerate() {
            lo[j] = v.lower / col_scale[j];
            up[j] = v.upper / col_scale[j];
        }
        for (i, c) in model.constraints().iter().enumerate() {
            let b = c.rhs * row_scale[i];
            let (l, u) = match c.relation {
                Relation::Le => (f64::NEG_INFINITY, b),
                Relation::Ge => (b, f64::INFINITY),
                Relation::Eq => (b, b),
            };
            lo[n + i] = l;
            up[n + i] = u;
        }
        let ftol = lo
            .iter()
            .zip(&up)
            .map(|(&l, &u)| {
                let mut mag: f64 = 1.0;
                if l.is_finite() {
                    mag = mag.max(l.abs());
                }
                if u.is_finite() {
                    mag = mag.max(u.abs());
                }
                opts.feasibility_tol * mag
            })
            .collect();

        let mut x = vec![0.0; n + m];
        let mut stat = vec![St::Lower; n + m];
        for j in 0..n {
            let (s, v) = resting_place(lo[j], up[j], St::Lower);
            stat[j] = s;
            x[j] = v;
        }
        let head: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (i, &hd) in head.iter().enumerate() {
            stat[hd] = St::Basic(i);
        }

        Engine {
            opts,
            m,
            n,
            a,
            lo,
            up,
            cost,
            ftol,
            row_scale,
            col_scale,
            cost_scale,
            x,
            stat,
            head,
            lu: LuFactors::default(),
            etas: Vec::new(),
            eta_nnz: 0,
            rhs: vec![0.0; m],
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            h: vec![0.0; m],
            cb: vec![0.0; m],
            neg_unit_idx: (0..m).collect(),
            weights: vec![1.0; n + m],
            rho: vec![0.0; m],
            cwork: vec![0.0; m],
            at,
            row: vec![0.0; n + m],
            row_nz: Vec::new(),
            d: vec![0.0; n + m],
            ceff: vec![0.0; n + m],
            d_valid: false,
            iterations: 0,
            phase1: false,
            saved_bounds: None,
            perturbed_once: false,
        }
    }

    fn load_basis(&mut self, basis: &Basis) {
        let (n, m) = (self.n, self.m);
        if basis.statuses.len() != n + m {
            return;
        }
        let basics: Vec<usize> = (0..n + m)
            .filter(|&j| basis.statuses[j] == BasisStatus::Basic)
            .collect();
        if basics.len() != m {
            return;
        }
        for j in 0..n + m {
            let pref = match basis.statuses[j] {
                BasisStatus::AtUpper => St::Upper,
                BasisStatus::Free => St::Free,
                _ => St::Lower,
            };
            let (s, v) = resting_place(self.lo[j], self.up[j], pref);
            self.stat[j] = s;
            self.x[j] = v;
        }
        for (pos, &j) in basics.iter().enumerate() {
            self.head[pos] = j;
            self.stat[j] = St::Basic(pos);
        }
    }

    /// Triangular crash: structural columns replace the logicals of
    /// equality rows (which can never stay basic at a nonzero level) while
    /// the basis stays triangular, so it is nonsingular by construction.
    fn crash(&mut self) {
        let (n, m) = (self.n, self.m);
        let rank = |j: usize| match (self.lo[j].is_finite(), self.up[j].is_finite()) {
            (false, false) => 0,
            (true, false) | (false, true) => 1,
            (true, true) => 2,
        };
        let mut cols: Vec<usize> = (0..n)
            .filter(|&j| self.up[j] > self.lo[j] && !self.a.col(j).0.is_empty())
            .collect();
        cols.sort_by_key(|&j| (rank(j), self.a.col(j).0.len(), j));
        let mut touched = vec![false; m];
        for j in cols {
            let (idx, val) = self.a.col(j);
            let amax = val.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let pick = idx.iter().zip(val).find(|(&i, &v)| {
                !touched[i] && v.abs() >= 0.9 * amax && self.lo[n + i] == self.up[n + i]
            });
            let Some((&i, _)) = pick else { continue };
            let logical = n + i;
            let (st, v) = resting_place(self.lo[logical], self.up[logical], St::Lower);
            self.stat[logical] = st;
            self.x[logical] = v;
            self.head[i] = j;
            self.stat[j] = St::Basic(i);
            for &r in idx {
                touched[r] = true;
            }
        }
    }

    fn column(&self, j: usize) -> BasisColumn<'_> {
        if j < self.n {
            let (i, v) = self.a.col(j);
            BasisColumn::Sparse(i, v)
        } else {
            BasisColumn::NegUnit(self.neg_unit_idx[j - self.n])
        }
    }

    fn refactor(&mut self) {
        let cols: Vec<BasisColumn<'_>> = self.head.iter().map(|&j| self.column(j)).collect();
        let (lu, reps) = LuFactors::factorize(self.m, &cols);
        drop(cols);
        self.lu = lu;
        for r in reps {
            let old = self.head[r.pos];
            let (s, v) = resting_place(self.lo[old], self.up[old], nearest(self.x[old], self.lo[old], self.up[old]));
            self.stat[old] = s;
            self.x[old] = v;
            let logical = self.n + r.row;
            self.head[r.pos] = logical;
            self.stat[logical] = St::Basic(r.pos);
        }
        self.etas.clear();
        self.eta_nnz = 0;
        self.d_valid = false;
        self.compute_basic_values();
    }

    fn compute_basic_values(&mut self) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n + self.m {
            if matches!(self.stat[j], St::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                let (idx, val) = self.a.col(j);
                for (&i, &v) in idx.iter().zip(val) {
                    self.rhs[i] -= v * xj;
                }
            } else {
                self.rhs[j - self.n] += xj;
            }
        }
        let mut out = vec![0.0; self.m];
        self.lu.solve(&mut self.rhs, &mut out);
        for eta in &self.etas {
            eta.apply(&mut out);
        }
        for (pos, &j) in self.head.iter().enumerate() {
            self.x[j] = out[pos];
        }
    }

    /// Widens every bound by a small pseudo-random amount so that a stalled
    /// degenerate vertex becomes nondegenerate. Nonbasic fixed columns are
    /// left alone; they never enter.
    fn perturb_bounds(&mut self) {
        self.saved_bounds = Some((self.lo.clone(), self.up.clone()));
        self.perturbed_once = true;
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        for j in 0..self.n + self.m {
            let basic = matches!(self.stat[j], St::Basic(_));
            if !basic && self.up[j] <= self.lo[j] {
                continue;
            }
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let delta = 100.0 * self.ftol[j] * (1.0 + u);
            self.lo[j] -= delta;
            self.up[j] += delta;
            match self.stat[j] {
                St::Lower => self.x[j] = self.lo[j],
                St::Upper => self.x[j] = self.up[j],
                _ => {}
            }
        }
        self.compute_basic_values();
    }

    /// Restores the original bounds; returns false if none were saved.
    fn remove_perturbation(&mut self) -> bool {
        let Some((lo, up)) = self.saved_bounds.take() else {
            return false;
        };
        self.lo = lo;
        self.up = up;
        for j in 0..self.n + self.m {
            match self.stat[j] {
                St::Lower => self.x[j] = self.lo[j],
                St::Upper => self.x[j] = self.up[j],
                _ => {}
            }
        }
        self.compute_basic_values();
        true
    }

    /// alpha = B^{-1} a_j
    fn ftran_column(&mut self, j: usize) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            let (idx, val) = self.a.col(j);
            for (&i, &v) in idx.iter().zip(val) {
                self.rhs[i] += v;
            }
        } else {
            self.rhs[j - self.n] = -1.0;
        }
        self.lu.solve(&mut self.rhs, &mut self.alpha);
        for eta in &self.etas {
            eta.apply(&mut self.alpha);
        }
    }

    /// y = c_B^T B^{-1} using the current `cb`.
    fn btran(&mut self) {
        self.cwork.copy_from_slice(&self.cb);
        for eta in self.etas.iter().rev() {
            eta.apply_transpose(&mut self.cwork);
        }
        self.lu.solve_transpose(&self.cwork, &mut self.h, &mut self.y);
    }

    /// Computes the pivot row for basis position `pos`, then updates the
    /// reduced costs and (unless `bland`) the Devex reference weights for
    /// `q` entering there. Must run before the basis change is recorded.
    fn pivot_row_update(&mut self, q: usize, pos: usize, bland: bool) {
        self.cwork.iter_mut().for_each(|v| *v = 0.0);
        self.cwork[pos] = 1.0;
        for eta in self.etas.iter().rev() {
            eta.apply_transpose(&mut self.cwork);
        }
        self.lu.solve_transpose(&self.cwork, &mut self.h, &mut self.rho);

        for &j in &self.row_nz {
            self.row[j] = 0.0;
        }
        self.row_nz.clear();
        for i in 0..self.m {
            let r = self.rho[i];
            if r == 0.0 {
                continue;
            }
            let (idx, val) = self.at.col(i);
            for (&j, &v) in idx.iter().zip(val) {
                if self.row[j] == 0.0 {
                    self.row_nz.push(j);
                }
                self.row[j] += r * v;
                if self.row[j] == 0.0 {
                    self.row[j] = f64::MIN_POSITIVE;
                }
            }
            let lj = self.n + i;
            self.row[lj] = -r;
            self.row_nz.push(lj);
        }

        let arq = self.alpha[pos];
        let leaving = self.head[pos];
        let theta_d = self.d[q] / arq;
        let wq = self.weights[q];
        let mut wmax: f64 = 0.0;
        for &j in &self.row_nz {
            if j == q || matches!(self.stat[j], St::Basic(_)) {
                continue;
            }
            let arj = self.row[j];
            self.d[j] -= theta_d * arj;
            if !bland {
                let r = arj / arq;
                let w = (r * r * wq).max(self.weights[j]);
                self.weights[j] = w;
                wmax = wmax.max(w);
            }
        }
        self.d[q] = 0.0;
        self.d[leaving] = -theta_d;
        if !bland {
            self.weights[leaving] = (wq / (arq * arq)).max(1.0);
            if wmax > 1e8 {
                self.weights.iter_mut().for_each(|w| *w = 1.0);
            }
        }
    }

    /// Effective cost of `j` in the current phase.
    fn phase_cost(&self, j: usize) -> f64 {
        match self.stat[j] {
            St::Basic(pos) => self.cb[pos],
            _ if self.phase1 => 0.0,
            _ => self.cost[j],
        }
    }

    /// Recomputes the reduced costs from scratch unless the incrementally
    /// maintained ones were built from the same costs.
    fn refresh_reduced_costs(&mut self) {
        if self.d_valid && (0..self.n + self.m).all(|j| self.phase_cost(j) == self.ceff[j]) {
            return;
        }
        self.btran();
        for j in 0..self.n + self.m {
            self.ceff[j] = self.phase_cost(j);
            self.d[j] = match self.stat[j] {
                St::Basic(_) => 0.0,
                _ => self.reduced_cost(j),
            };
        }
        self.d_valid = true;
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.ftol[j] {
            -1.0
        } else if v > self.up[j] + self.ftol[j] {
            1.0
        } else {
            0.0
        }
    }

    /// Fills `cb` for the current phase; returns true when in phase 1.
    fn set_phase_costs(&mut self) -> bool {
        let mut any = false;
        for pos in 0..self.m {
            let j = self.head[pos];
            let s = self.infeasibility(j);
            if s != 0.0 {
                any = true;
            }
            self.cb[pos] = s;
        }
        if !any {
            for pos in 0..self.m {
                self.cb[pos] = self.cost[self.head[pos]];
            }
        }
        self.phase1 = any;
        any
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = if self.phase1 { 0.0 } else { self.cost[j] };
        if j < self.n {
            let (idx, val) = self.a.col(j);
            let mut dot = 0.0;
            for (&i, &v) in idx.iter().zip(val) {
                dot += self.y[i] * v;
            }
            c - dot
        } else {
            c + self.y[j - self.n]
        }
    }

    /// Entering column and its reduced cost, or None at optimality.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let improving = match self.stat[j] {
                St::Basic(_) => continue,
                St::Lower => {
                    if self.up[j] <= self.lo[j] {
                        continue;
                    }
                    let d = self.d[j];
                    (d < -tol).then_some(d)
                }
                St::Upper => {
                    if self.up[j] <= self.lo[j] {
                        continue;
                    }
                    let d = self.d[j];
                    (d > tol).then_some(d)
                }
                St::Free => {
                    let d = self.d[j];
                    (d.abs() > tol).then_some(d)
                }
            };
            if let Some(d) = improving {
                if bland {
                    return Some((j, d));
                }
                let score = d * d / self.weights[j];
                if best.is_none_or(|(_, bs, _)| score > bs) {
                    best = Some((j, score, d));
                }
            }
        }
        best.map(|(j, _, d)| (j, d))
    }

    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Step {
        let ptol = self.opts.pivot_tol;
        let range = self.up[q] - self.lo[q];
        // (pos, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for pos in 0..self.m {
            let a = self.alpha[pos];
            if a.abs() <= ptol {
                continue;
            }
            let j = self.head[pos];
            let v = self.x[j];
            let delta = -dir * a;
            let tol = self.ftol[j];
            if delta > 0.0 {
                if v < self.lo[j] - tol {
                    let r = (self.lo[j] - v) / delta;
                    cands.push((pos, r, r, false));
                } else if self.up[j].is_finite() && v <= self.up[j] + tol {
                    let exact = (self.up[j] - v) / delta;
                    let relaxed = (self.up[j] + tol - v) / delta;
                    cands.push((pos, exact, relaxed, true));
                }
            } else if v > self.up[j] + tol {
                let r = (v - self.up[j]) / -delta;
                cands.push((pos, r, r, true));
            } else if self.lo[j].is_finite() && v >= self.lo[j] - tol {
                let exact = (v - self.lo[j]) / -delta;
                let relaxed = (v - self.lo[j] + tol) / -delta;
                cands.push((pos, exact, relaxed, false));
            }
        }

        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(pos, exact, _, up) in &cands {
                let r = exact.max(0.0);
                let better = match best {
                    None => true,
                    Some((bp, br, _)) => {
                        r < br - 1e-12 * (1.0 + br)
                            || (r <= br + 1e-12 * (1.0 + br) && self.head[pos] < self.head[bp])
                    }
                };
                if better {
                    best = Some((pos, r, up));
                }
            }
            return match best {
                Some((_, r, _)) if range.is_finite() && range <= r => Step::Flip(range),
                Some((pos, theta, to_upper)) => Step::Pivot {
                    pos,
                    theta,
                    to_upper,
                },
                None if range.is_finite() => Step::Flip(range),
                None => Step::Unbounded,
            };
        }

        let theta_max = cands
            .iter()
            .map(|c| c.2)
            .fold(f64::INFINITY, f64::min);
        if range.is_finite() && range <= theta_max {
            return Step::Flip(range);
        }
        if cands.is_empty() {
            return Step::Unbounded;
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for &(pos, exact, _, up) in &cands {
            if exact <= theta_max {
                let mag = self.alpha[pos].abs();
                if best.is_none_or(|b| mag > b.3) {
                    best = Some((pos, exact, up, mag));
                }
            }
        }
        let (pos, exact, to_upper, _) = best.expect("theta_max comes from a candidate");
        Step::Pivot {
            pos,
            theta: exact.max(0.0),
            to_upper,
        }
    }

    fn max_iterations(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(20 * (self.n + self.m) + 10_000)
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        self.refactor();
        let limit = self.max_iterations();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut since_refactor = 0usize;
        let mut verified = false;

        loop {
            if since_refactor >= self.opts.refactor_interval
                || self.eta_nnz > 3 * self.lu.nnz() + 10 * self.m
            {
                self.refactor();
                since_refactor = 0;
            }
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }

            let phase1 = self.set_phase_costs();
            self.refresh_reduced_costs();
            let Some((q, d)) = self.price(bland) else {
                if self.remove_perturbation() {
                    verified = false;
                    continue;
                }
                // Confirm on a fresh factorization before declaring the end.
                if !verified && since_refactor > 0 {
                    self.refactor();
                    since_refactor = 0;
                    verified = true;
                    continue;
                }
                return Ok(if phase1 {
                    Outcome::Infeasible
                } else {
                    Outcome::Optimal
                });
            };
            verified = false;

            let dir = match self.stat[q] {
                St::Lower => 1.0,
                St::Upper => -1.0,
                _ => {
                    if d < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            self.ftran_column(q);
            let step = self.ratio_test(q, dir, bland);
            self.iterations += 1;
            since_refactor += 1;

            let theta = match step {
                Step::Unbounded => {
                    if since_refactor > 1 {
                        self.refactor();
                        since_refactor = 0;
                        continue;
                    }
                    if phase1 {
                        return Err(LpError::Numerical(
                            "phase 1 ray without blocking variable".into(),
                        ));
                    }
                    return Ok(Outcome::Unbounded);
                }
                Step::Flip(t) => t,
                Step::Pivot { theta, .. } => theta,
            };

            if theta > 0.0 {
                let step_len = dir * theta;
                self.x[q] += step_len;
                for pos in 0..self.m {
                    let a = self.alpha[pos];
                    if a != 0.0 {
                        self.x[self.head[pos]] -= step_len * a;
                    }
                }
            }

            match step {
                Step::Flip(_) => {
                    if dir > 0.0 {
                        self.stat[q] = St::Upper;
                        self.x[q] = self.up[q];
                    } else {
                        self.stat[q] = St::Lower;
                        self.x[q] = self.lo[q];
                    }
                }
                Step::Pivot { pos, to_upper, .. } => {
                    self.pivot_row_update(q, pos, bland);
                    let leaving = self.head[pos];
                    if to_upper {
                        self.stat[leaving] = St::Upper;
                        self.x[leaving] = self.up[leaving];
                    } else {
                        self.stat[leaving] = St::Lower;
                        self.x[leaving] = self.lo[leaving];
                    }
                    self.head[pos] = q;
                    self.stat[q] = St::Basic(pos);
                    let eta = Eta::new(&self.alpha, pos);
                    self.eta_nnz += eta.nnz();
                    self.etas.push(eta);
                }
                Step::Unbounded => unreachable!(),
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= self.opts.bland_after {
                    if self.perturbed_once {
                        bland = true;
                    } else {
                        self.perturb_bounds();
                        degenerate_run = 0;
                    }
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn into_solution(mut self, model: &LpModel, outcome: Outcome) -> Solution {
        match outcome {
            Outcome::Infeasible => {
                return Solution::without_point(Status::Infeasible, self.iterations)
            }
            Outcome::Unbounded => {
                return Solution::without_point(Status::Unbounded, self.iterations)
            }
            Outcome::Optimal => {}
        }
        // Duals from the phase-2 basis.
        self.phase1 = false;
        for pos in 0..self.m {
            self.cb[pos] = self.cost[self.head[pos]];
        }
        self.btran();

        let sign = if model.sense() == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let n = self.n;
        let mut values: Vec<f64> = (0..n).map(|j| self.x[j] * self.col_scale[j]).collect();
        // Snap to bounds that are within tolerance; binaries stay exact.
        for (j, v) in model.vars().iter().enumerate() {
            if values[j] < v.lower {
                values[j] = v.lower;
            } else if values[j] > v.upper {
                values[j] = v.upper;
            }
            if v.kind == VarKind::Binary && !matches!(self.stat[j], St::Basic(_)) {
                values[j] = values[j].clamp(0.0, 1.0);
            }
        }
        let duals: Vec<f64> = (0..self.m)
            .map(|i| sign * self.y[i] * self.row_scale[i] / self.cost_scale)
            .collect();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| {
                if matches!(self.stat[j], St::Basic(_)) {
                    0.0
                } else {
                    sign * self.reduced_cost(j) / (self.cost_scale * self.col_scale[j])
                }
            })
            .collect();
        let statuses = self
            .stat
            .iter()
            .map(|s| match s {
                St::Basic(_) => BasisStatus::Basic,
                St::Lower => BasisStatus::AtLower,
                St::Upper => BasisStatus::AtUpper,
                St::Free => BasisStatus::Free,
            })
            .collect();
        Solution {
            status: Status::Optimal,
            objective: model.objective_value(&values),
            values,
            duals,
            reduced_costs,
            iterations: self.iterations,
            nodes: 0,
            basis: Some(Basis { statuses }),
        }
    }
}

/// Status and value of a nonbasic column given a preferred side.
fn resting_place(lo: f64, up: f64, pref: St) -> (St, f64) {
    match pref {
        St::Upper if up.is_finite() => (St::Upper, up),
        _ if lo.is_finite() => (St::Lower, lo),
        _ if up.is_finite() => (St::Upper, up),
        _ => (St::Free, 0.0),
    }
}

fn nearest(v: f64, lo: f64, up: f64) -> St {
    if (v - up).abs() < (v - lo).abs() {
        St::Upper
    } else {
        St::Lower
    }
}

fn pow2(v: f64) -> f64 {
    2f64.powi(v.log2().round() as i32)
}

/// Geometric-mean row/column scaling, rounded to powers of two.
fn transpose(a: &CscMatrix, m: usize) -> CscMatrix {
    let n = a.ncols();
    let mut start = vec![0usize; m + 1];
    for &i in &a.idx {
        start[i + 1] += 1;
    }
    for i in 0..m {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut idx = vec![0usize; a.idx.len()];
    let mut val = vec![0.0; a.idx.len()];
    for j in 0..n {
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            idx[fill[i]] = j;
            val[fill[i]] = v;
            fill[i] += 1;
        }
    }
    CscMatrix { start, idx, val }
}

fn scale_factors(a: &CscMatrix, m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = a.ncols();
    let mut r = vec![1.0f64; m];
    let mut s = vec![1.0f64; n];
    for _ in 0..4 {
        let mut rmax = vec![0.0f64; m];
        let mut rmin = vec![f64::INFINITY; m];
        for j in 0..n {
            let (idx, val) = a.col(j);
            for (&i, &v) in idx.iter().zip(val) {
                let x = (v * s[j]).abs();
                if x > 0.0 {
                    rmax[i] = rmax[i].max(x);
                    rmin[i] = rmin[i].min(x);
                }
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                r[i] = 1.0 / (rmax[i] * rmin[i]).sqrt();
            }
        }
        for j in 0..n {
            let (idx, val) = a.col(j);
            let mut cmax = 0.0f64;
            let mut cmin = f64::INFINITY;
            for (&i, &v) in idx.iter().zip(val) {
                let x = (v * r[i]).abs();
                if x > 0.0 {
                    cmax = cmax.max(x);
                    cmin = cmin.min(x);
                }
            }
            if cmax > 0.0 {
                s[j] = 1.0 / (cmax * cmin).sqrt();
            }
        }
    }
    (
        r.into_iter().map(pow2).collect(),
        s.into_iter().map(pow2).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearExpr, LpModel, Relation, Sense};

    fn solve(m: &LpModel) -> Solution {
        SimplexSolver::default().solve(m).unwrap()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut m = LpModel::new();
        let x = m.add_var("x", 0.0, 10.0);
        m.add_constraint("c", x, Relation::Ge, 3.0);
        m.set_objective(x, Sense::Minimize);
        let s = solve(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_max() {
        let mut m = LpModel::new();
        let a = m.add_var("a", 0.0, f64::INFINITY);
        let b = m.add_var("b", 0.0, f64::INFINITY);
        m.add_constraint("sum", a + b, Relation::Le, 4.0);
        m.add_constraint("acap", a, Relation::Le, 2.0);
        m.set_objective(a * 2.0 + b * 3.0, Sense::Maximize);
        let s = solve(&m);
        assert!((s.objective - 12.0).abs() < 1e-9);
        assert!((s.values[1] - 4.0).abs() < 1e-9);
        assert!((s.dual_objective(&m) - 12.0).abs() < 1e-9);
        assert!(s.dual_infeasibility(&m) < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = LpModel::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("lo", x, Relation::Ge, 1.0);
        m.add_constraint("hi", x, Relation::Le, 0.0);
        m.set_objective(x, Sense::Minimize);
        assert_eq!(solve(&m).status, Status::Infeasible);

        let mut m = LpModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY);
        let y = m.add_var("y", 0.0, f64::INFINITY);
        m.add_constraint("c", x - y, Relation::Le, 1.0);
        m.set_objective(LinearExpr::from(x) * -1.0, Sense::Minimize);
        assert_eq!(solve(&m).status, Status::Unbounded);
    }

    #[test]
    fn no_rows() {
        let mut m = LpModel::new();
        let x = m.add_var("x", -2.0, 5.0);
        let y = m.add_var("y", 1.0, 3.0);
        m.set_objective(x * 1.0 - y, Sense::Minimize);
        let s = solve(&m);
        assert_eq!(s.values, vec![-2.0, 3.0]);
    }

    #[test]
    fn free_variable_and_equalities() {
        // min x + y s.t. x - y = 1, x + 2y >= 4, y free, x >= 0
        let mut m = LpModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY);
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("e", x - y, Relation::Eq, 1.0);
        m.add_constraint("g", x + y * 2.0, Relation::Ge, 4.0);
        m.set_objective(x + y, Sense::Minimize);
        let s = solve(&m);
        assert!((s.values[0] - 2.0).abs() < 1e-9);
        assert!((s.values[1] - 1.0).abs() < 1e-9);
        assert!((s.dual_objective(&m) - s.objective).abs() < 1e-9);
    }

    #[test]
    fn warm_start_reuses_basis() {
        let mut m = LpModel::new();
        let a = m.add_var("a", 0.0, 3.0);
        let b = m.add_var("b", 0.0, 3.0);
        m.add_constraint("sum", a + b, Relation::Le, 4.0);
        m.set_objective(a * 2.0 + b, Sense::Maximize);
        let s1 = solve(&m);
        let s2 = SimplexSolver::default()
            .solve_relaxation(&m, s1.basis.as_ref())
            .unwrap();
        assert_eq!(s2.iterations, 0);
        assert!((s1.objective - s2.objective).abs() < 1e-12);
    }
}
