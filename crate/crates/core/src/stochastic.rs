//! Two-stage deterministic equivalent with an optional CVaR bound.
//!
//! A [`ModelTemplate`] is a single-scenario LP whose variables are tagged
//! with the hour (and market) they belong to, plus a list of priced
//! cashflows. [`assemble`] copies every second-stage variable once per
//! scenario, keeps one shared copy of each first-stage variable, prices
//! the cashflows, and adds the CVaR rows
//!
//! ```text
//! L_s - zeta - eta_s <= 0                 for every scenario s
//! zeta + 1/(1-alpha) * sum_s pi_s eta_s <= epsilon
//! ```
//!
//! where `L_s` is the scenario loss under the configured [`RiskScope`].

use serde::{Deserialize, Serialize};
use storage_risk_lp::{LinearExpr, LpError, LpModel, Relation, Sense, Solution, Solver, Status, VarId, Variable};
use thiserror::Error;

use crate::evaluation::oracle_cvar;
use crate::market_data::{Market, PriceMap, TimeGrid};
use crate::scenario_gen::ScenarioSet;

/// What a template variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    /// Sizing decision, always first stage.
    Design,
    /// Operating decision for one hour, optionally tied to one market.
    Hour { hour: usize, market: Option<Market> },
}

/// How the template splits into here-and-now and recourse decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageRule {
    /// Hours before `grid.t_obs` are first stage, later hours are recourse.
    TimeSplit,
    /// Decisions and prices of `first` are first stage at every hour; all
    /// other market decisions and market-free state are recourse.
    MarketSplit { first: Market },
}

/// `price(hour, market) * energy` enters the operating cost. Energy is in
/// MWh with purchases positive.
#[derive(Clone, Debug)]
pub struct Cashflow {
    pub hour: usize,
    pub market: Market,
    pub energy: LinearExpr,
}

#[derive(Clone, Debug)]
pub struct ModelTemplate {
    /// Single-scenario model; its objective is ignored.
    pub model: LpModel,
    pub slots: Vec<Slot>,
    pub cashflows: Vec<Cashflow>,
    /// Deterministic cost on first-stage variables (capital charges).
    pub fixed_cost: LinearExpr,
    pub stage_rule: StageRule,
    pub grid: TimeGrid,
}

impl ModelTemplate {
    pub fn is_first_stage(&self, j: usize) -> bool {
        match (self.slots[j], self.stage_rule) {
            (Slot::Design, _) => true,
            (Slot::Hour { hour, .. }, StageRule::TimeSplit) => hour < self.grid.t_obs,
            (Slot::Hour { market, .. }, StageRule::MarketSplit { first }) => market == Some(first),
        }
    }

    /// Whether the price for `(hour, market)` is known at decision time.
    pub fn price_is_first_stage(&self, hour: usize, market: Market) -> bool {
        match self.stage_rule {
            StageRule::TimeSplit => hour < self.grid.t_obs,
            StageRule::MarketSplit { first } => market == first,
        }
    }

    /// Hours the scenario set has to cover.
    pub fn scenario_span(&self) -> (usize, usize) {
        match self.stage_rule {
            StageRule::TimeSplit => (self.grid.t_obs, self.grid.num_observed()),
            StageRule::MarketSplit { .. } => (self.grid.t0, self.grid.len()),
        }
    }

    pub fn first_stage_mask(&self) -> Vec<bool> {
        (0..self.slots.len()).map(|j| self.is_first_stage(j)).collect()
    }
}

/// Collects variables together with their stage slots.
#[derive(Default)]
pub(crate) struct TemplateBuilder {
    pub model: LpModel,
    pub slots: Vec<Slot>,
}

impl TemplateBuilder {
    pub fn var(&mut self, name: String, lower: f64, upper: f64, slot: Slot) -> VarId {
        self.slots.push(slot);
        self.model.add_var(name, lower, upper)
    }

    pub fn binary(&mut self, name: String, slot: Slot) -> VarId {
        self.slots.push(slot);
        self.model.add_binary(name)
    }

    pub fn hourly(&mut self, name: &str, t: usize, lower: f64, upper: f64) -> VarId {
        self.var(format!("{name}[{t}]"), lower, upper, Slot::Hour { hour: t, market: None })
    }

    pub fn per_market(&mut self, name: &str, t: usize, lower: f64, upper: f64) -> [VarId; 2] {
        Market::ALL.map(|mk| {
            self.var(
                format!("{name}[{t},{mk}]"),
                lower,
                upper,
                Slot::Hour { hour: t, market: Some(mk) },
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskScope {
    /// CVaR of the recourse cost `v_s` alone.
    SecondStage,
    /// CVaR of first-stage cost plus `v_s`.
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    /// Upper bound on CVaR; `f64::INFINITY` drops the constraint.
    pub epsilon: f64,
    pub scope: RiskScope,
}

impl RiskConfig {
    pub fn neutral(alpha: f64, scope: RiskScope) -> Self {
        Self {
            alpha,
            epsilon: f64::INFINITY,
            scope,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    fn validate(&self) -> Result<(), StochasticError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StochasticError::InvalidRisk(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.epsilon.is_nan() || self.epsilon == f64::NEG_INFINITY {
            return Err(StochasticError::InvalidRisk(format!("epsilon {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("scenario set does not line up with the template: {0}")]
    MisalignedScenarioSet(String),
    #[error("no first-stage price for hour {hour} in market {market}")]
    MissingPrice { hour: usize, market: Market },
    #[error("template stage violation: {0}")]
    TemplateStageViolation(String),
    #[error("solve ended with status {0:?}")]
    NotOptimal(Status),
    #[error("value {value} for {name} is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("invalid risk configuration: {0}")]
    InvalidRisk(String),
    #[error(transparent)]
    Solver(#[from] LpError),
}

#[derive(Clone, Debug)]
pub struct CvarBlock {
    pub zeta: VarId,
    pub eta: Vec<VarId>,
    /// Index of the `<= epsilon` row, if the bound is present.
    pub bound_row: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct StochasticProgram {
    pub monolith: LpModel,
    /// `var_map[s][j]`: monolith variable for template variable `j` in
    /// scenario `s`. First-stage variables map to the same id everywhere.
    pub var_map: Vec<Vec<VarId>>,
    pub first_stage: Vec<bool>,
    pub template_names: Vec<String>,
    /// Per-scenario recourse cost variables.
    pub v: Vec<VarId>,
    /// Capital plus first-stage-priced operating cost.
    pub first_cost: LinearExpr,
    /// Operating cost per scenario and market, both stages.
    pub market_costs: Vec<[LinearExpr; 2]>,
    pub probabilities: Vec<f64>,
    pub cvar: Option<CvarBlock>,
    pub risk: RiskConfig,
    pub fingerprint: String,
}

fn stage_violation(msg: String) -> StochasticError {
    StochasticError::TemplateStageViolation(msg)
}

pub fn assemble(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    risk: &RiskConfig,
) -> Result<StochasticProgram, StochasticError> {
    risk.validate()?;
    let tm = &template.model;
    let n = tm.num_vars();
    if template.slots.len() != n {
        return Err(stage_violation(format!("{} slots for {n} variables", template.slots.len())));
    }
    let (start, hours) = template.scenario_span();
    if hours > 0 && (scenarios.start() != start || scenarios.hours() != hours) {
        return Err(StochasticError::MisalignedScenarioSet(format!(
            "template needs hours {start}..{} but the set covers {}..{}",
            start + hours,
            scenarios.start(),
            scenarios.end()
        )));
    }
    let n_s = scenarios.len();
    let first = template.first_stage_mask();

    let mut mono = LpModel::new();
    let mut shared = vec![None; n];
    for j in 0..n {
        if first[j] {
            shared[j] = Some(mono.push_var(tm.vars()[j].clone()));
        }
    }
    let mut var_map = Vec::with_capacity(n_s);
    let mut v = Vec::with_capacity(n_s);
    for s in 0..n_s {
        let map: Vec<VarId> = (0..n)
            .map(|j| {
                shared[j].unwrap_or_else(|| {
                    let tv = &tm.vars()[j];
                    mono.push_var(Variable {
                        name: format!("{}@s{s}", tv.name),
                        ..tv.clone()
                    })
                })
            })
            .collect();
        var_map.push(map);
        v.push(mono.add_var(format!("v@s{s}"), f64::NEG_INFINITY, f64::INFINITY));
    }

    for c in tm.constraints() {
        if c.expr.vars().all(|x| first[x.0]) {
            let e = c.expr.remap(|x| shared[x.0].expect("first stage"));
            mono.add_constraint(c.name.clone(), e, c.relation, c.rhs);
        } else {
            for (s, map) in var_map.iter().enumerate() {
                let e = c.expr.remap(|x| map[x.0]);
                mono.add_constraint(format!("{}@s{s}", c.name), e, c.relation, c.rhs);
            }
        }
    }

    let to_first = |e: &LinearExpr, what: &str| -> Result<LinearExpr, StochasticError> {
        if let Some(x) = e.vars().find(|x| !first[x.0]) {
            return Err(stage_violation(format!(
                "{what} references recourse variable {}",
                tm.vars()[x.0].name
            )));
        }
        Ok(e.remap(|x| shared[x.0].expect("checked")))
    };

    let mut first_cost = to_first(&template.fixed_cost, "fixed cost")?;
    let mut market_first: [LinearExpr; 2] = Default::default();
    let mut second: Vec<LinearExpr> = vec![LinearExpr::new(); n_s];
    let mut market_costs: Vec<[LinearExpr; 2]> = vec![Default::default(); n_s];
    for cf in &template.cashflows {
        if template.price_is_first_stage(cf.hour, cf.market) {
            let price = first_prices
                .get(&cf.market)
                .and_then(|p| p.at(cf.hour))
                .ok_or(StochasticError::MissingPrice {
                    hour: cf.hour,
                    market: cf.market,
                })?;
            let e = to_first(&cf.energy, &format!("first-stage cashflow at hour {}", cf.hour))?;
            first_cost.add_scaled(&e, price);
            market_first[cf.market.index()].add_scaled(&e, price);
        } else {
            for s in 0..n_s {
                let price = scenarios.price(s, cf.hour, cf.market).ok_or_else(|| {
                    StochasticError::MisalignedScenarioSet(format!(
                        "no scenario price for hour {} market {}",
                        cf.hour, cf.market
                    ))
                })?;
                let e = cf.energy.remap(|x| var_map[s][x.0]);
                second[s].add_scaled(&e, price);
                market_costs[s][cf.market.index()].add_scaled(&e, price);
            }
        }
    }
    first_cost.canonicalize();
    for s in 0..n_s {
        for k in 0..2 {
            market_costs[s][k].add_scaled(&market_first[k], 1.0);
            market_costs[s][k].canonicalize();
        }
        let row = LinearExpr::from(v[s]) - second[s].clone();
        mono.add_constraint(format!("vdef@s{s}"), row, Relation::Eq, 0.0);
    }

    let probabilities = scenarios.probabilities().to_vec();
    let mut objective = first_cost.clone();
    for (s, &p) in probabilities.iter().enumerate() {
        objective.add_term(v[s], p);
    }
    mono.set_objective(objective, Sense::Minimize);

    let mut program = StochasticProgram {
        monolith: mono,
        var_map,
        first_stage: first,
        template_names: tm.vars().iter().map(|x| x.name.clone()).collect(),
        v,
        first_cost,
        market_costs,
        probabilities,
        cvar: None,
        risk: *risk,
        fingerprint: scenarios.fingerprint(),
    };
    if risk.epsilon.is_finite() {
        program.add_cvar_block(Some(risk.epsilon));
    }
    program.check_scenario_separation()?;
    Ok(program)
}

impl StochasticProgram {
    pub fn num_scenarios(&self) -> usize {
        self.v.len()
    }

    /// Loss expression of scenario `s` under the configured scope.
    pub fn loss_expr(&self, s: usize) -> LinearExpr {
        match self.risk.scope {
            RiskScope::SecondStage => LinearExpr::from(self.v[s]),
            RiskScope::Total => self.first_cost.clone() + self.v[s],
        }
    }

    /// `zeta + 1/(1-alpha) * sum pi_s eta_s`, or None without a block.
    pub fn cvar_expr(&self) -> Option<LinearExpr> {
        let block = self.cvar.as_ref()?;
        let k = 1.0 / (1.0 - self.risk.alpha);
        let mut e = LinearExpr::from(block.zeta);
        for (s, &eta) in block.eta.iter().enumerate() {
            e.add_term(eta, k * self.probabilities[s]);
        }
        Some(e)
    }

    /// Adds zeta, eta_s and the tail rows; `bound` adds the epsilon row.
    pub fn add_cvar_block(&mut self, bound: Option<f64>) {
        if self.cvar.is_some() {
            return;
        }
        let zeta = self.monolith.add_var("cvar_zeta", f64::NEG_INFINITY, f64::INFINITY);
        let mut eta = Vec::with_capacity(self.v.len());
        for s in 0..self.v.len() {
            let e = self.monolith.add_var(format!("cvar_eta@s{s}"), 0.0, f64::INFINITY);
            let row = self.loss_expr(s) - zeta - e;
            self.monolith.add_constraint(format!("cvar_tail@s{s}"), row, Relation::Le, 0.0);
            eta.push(e);
        }
        self.cvar = Some(CvarBlock {
            zeta,
            eta,
            bound_row: None,
        });
        if let Some(eps) = bound {
            let e = self.cvar_expr().expect("block just added");
            let row = self.monolith.add_constraint("cvar_bound", e, Relation::Le, eps);
            if let Some(b) = self.cvar.as_mut() {
                b.bound_row = Some(row);
            }
        }
    }

    /// Replaces the objective with `w_e * expected cost + w_c * CVaR`,
    /// adding an unbounded CVaR block if needed.
    pub fn set_mean_cvar_objective(&mut self, expected_weight: f64, cvar_weight: f64) {
        self.add_cvar_block(None);
        let mut obj = LinearExpr::new();
        if expected_weight != 0.0 {
            obj.add_scaled(&self.first_cost, expected_weight);
            for (s, &p) in self.probabilities.iter().enumerate() {
                obj.add_term(self.v[s], expected_weight * p);
            }
        }
        obj.add_scaled(&self.cvar_expr().expect("block present"), cvar_weight);
        self.monolith.set_objective(obj, Sense::Minimize);
    }

    /// Rows may mix first-stage variables with one scenario's recourse
    /// variables, never two scenarios.
    fn check_scenario_separation(&self) -> Result<(), StochasticError> {
        let mut owner = vec![usize::MAX; self.monolith.num_vars()];
        for (s, map) in self.var_map.iter().enumerate() {
            for (j, &x) in map.iter().enumerate() {
                if !self.first_stage[j] {
                    owner[x.0] = s;
                }
            }
        }
        for c in self.monolith.constraints() {
            let mut seen = usize::MAX;
            for x in c.expr.vars() {
                let o = owner[x.0];
                if o == usize::MAX {
                    continue;
                }
                if seen != usize::MAX && seen != o {
                    return Err(stage_violation(format!(
                        "row {} couples scenarios {seen} and {o}",
                        c.name
                    )));
                }
                seen = o;
            }
        }
        Ok(())
    }

    pub fn solve(&self, solver: &dyn Solver) -> Result<Solution, StochasticError> {
        Ok(solver.solve(&self.monolith)?)
    }

    /// Solves and extracts; a non-optimal status becomes `NotOptimal`.
    pub fn solve_staged(&self, solver: &dyn Solver) -> Result<StagedSolution, StochasticError> {
        let sol = self.solve(solver)?;
        extract_solution(self, &sol)
    }
}

/// Per-scenario view of an optimal monolith solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StagedSolution {
    pub template_names: Vec<String>,
    pub first_stage: Vec<bool>,
    /// `values[s][j]` for template variable `j` in scenario `s`.
    pub values: Vec<Vec<f64>>,
    pub first_cost: f64,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
    /// Scenario losses under the program's risk scope.
    pub losses: Vec<f64>,
    /// Oracle CVaR of `losses`, recomputed from the values.
    pub cvar: f64,
    /// `first_cost + sum pi_s v_s`.
    pub expected_cost: f64,
    pub expected_loss: f64,
    /// Monolith objective as reported by the solver.
    pub objective: f64,
    /// `[DA, ID]` operating cost per scenario.
    pub market_costs: Vec<[f64; 2]>,
    pub alpha: f64,
    pub epsilon: f64,
    pub scope: RiskScope,
    pub fingerprint: String,
}

impl StagedSolution {
    /// First-stage values in template order (recourse entries are NaN).
    pub fn first_stage_values(&self) -> Vec<f64> {
        self.values[0]
            .iter()
            .zip(&self.first_stage)
            .map(|(&x, &f)| if f { x } else { f64::NAN })
            .collect()
    }

    pub fn value(&self, s: usize, name: &str) -> Option<f64> {
        let j = self.template_names.iter().position(|n| n == name)?;
        Some(self.values[s][j])
    }

    /// Expected operating cost per market, `[DA, ID]`.
    pub fn expected_market_costs(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, p) in self.market_costs.iter().zip(&self.pi) {
            out[0] += p * c[0];
            out[1] += p * c[1];
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let x: serde_json::Map<String, serde_json::Value> = self
            .template_names
            .iter()
            .zip(&self.first_stage)
            .zip(&self.values[0])
            .filter(|((_, f), _)| **f)
            .map(|((n, _), v)| (n.clone(), serde_json::json!(v)))
            .collect();
        let recourse: Vec<usize> = (0..self.first_stage.len()).filter(|&j| !self.first_stage[j]).collect();
        let y: Vec<serde_json::Value> = self
            .values
            .iter()
            .map(|vals| {
                let m: serde_json::Map<String, serde_json::Value> = recourse
                    .iter()
                    .map(|&j| (self.template_names[j].clone(), serde_json::json!(vals[j])))
                    .collect();
                serde_json::Value::Object(m)
            })
            .collect();
        serde_json::json!({
            "X": x,
            "Y": y,
            "v_s": self.v,
            "pi_s": self.pi,
            "cvar": self.cvar,
            "expected_cost": self.expected_cost,
            "first_cost": self.first_cost,
            "alpha": self.alpha,
            "epsilon": if self.epsilon.is_finite() { serde_json::json!(self.epsilon) } else { serde_json::json!("inf") },
        })
    }
}

pub fn extract_solution(program: &StochasticProgram, sol: &Solution) -> Result<StagedSolution, StochasticError> {
    if sol.status != Status::Optimal {
        return Err(StochasticError::NotOptimal(sol.status));
    }
    let x = &sol.values;
    let values: Vec<Vec<f64>> = program
        .var_map
        .iter()
        .map(|map| map.iter().map(|id| x[id.0]).collect())
        .collect();
    let first_cost = program.first_cost.eval(x);
    let v: Vec<f64> = program.v.iter().map(|id| x[id.0]).collect();
    let pi = program.probabilities.clone();
    let losses: Vec<f64> = match program.risk.scope {
        RiskScope::SecondStage => v.clone(),
        RiskScope::Total => v.iter().map(|vs| first_cost + vs).collect(),
    };
    let cvar = oracle_cvar(&losses, &pi, program.risk.alpha)
        .map_err(|e| StochasticError::InvalidRisk(e.to_string()))?;
    let expected_cost = first_cost + v.iter().zip(&pi).map(|(a, b)| a * b).sum::<f64>();
    let expected_loss = losses.iter().zip(&pi).map(|(a, b)| a * b).sum::<f64>();
    let market_costs = program
        .market_costs
        .iter()
        .map(|[a, b]| [a.eval(x), b.eval(x)])
        .collect();
    Ok(StagedSolution {
        template_names: program.template_names.clone(),
        first_stage: program.first_stage.clone(),
        values,
        first_cost,
        v,
        pi,
        losses,
        cvar,
        expected_cost,
        expected_loss,
        objective: sol.objective,
        market_costs,
        alpha: program.risk.alpha,
        epsilon: program.risk.epsilon,
        scope: program.risk.scope,
        fingerprint: program.fingerprint.clone(),
    })
}

/// Copy of `program` with every first-stage variable fixed to the value in
/// `x` (template order; recourse entries are ignored). Values within 1e-9
/// relative of a bound are snapped onto it.
pub fn fix_first_stage(program: &StochasticProgram, x: &[f64]) -> Result<StochasticProgram, StochasticError> {
    let mut out = program.clone();
    let map = &program.var_map[0];
    for (j, &is_first) in program.first_stage.iter().enumerate() {
        if !is_first {
            continue;
        }
        let id = map[j];
        let var = out.monolith.var(id).clone();
        let value = x[j];
        let tol = 1e-9 * (1.0 + value.abs());
        if !value.is_finite() || value < var.lower - tol || value > var.upper + tol {
            return Err(StochasticError::OutOfBounds {
                name: var.name,
                value,
                lower: var.lower,
                upper: var.upper,
            });
        }
        let v = value.clamp(var.lower, var.upper);
        out.monolith.set_bounds(id, v, v);
    }
    Ok(out)
}
