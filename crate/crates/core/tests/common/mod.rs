#![allow(dead_code)]

use storage_risk::market_data::{Currency, Market, PriceMap, PriceSeries, TimeGrid};
use storage_risk::scenario_gen::ScenarioSet;
use storage_risk::stochastic::{Cashflow, ModelTemplate, RiskConfig, RiskScope, Slot, StageRule};
use storage_risk_lp::{EmbeddedSolver, LinearExpr, LpModel, Relation};

pub fn solver() -> EmbeddedSolver {
    EmbeddedSolver::default()
}

/// Two-hour procurement toy with a hand-solvable frontier.
///
/// Five MWh must be bought: `x` at hour 0 in the day-ahead market for 50,
/// or `y` at hour 1 intraday for 20 or 70 with equal odds. With alpha 0.5
/// and the total cost as loss, CVaR is the cost of the expensive scenario.
/// Expected cost is `225 + 5x` and CVaR `350 - 20x` for `x <= 5`.
pub fn toy() -> (ModelTemplate, PriceMap, ScenarioSet) {
    let grid = TimeGrid::new(0, 1, 1).unwrap();
    let mut model = LpModel::new();
    let x = model.add_var("x", 0.0, 10.0);
    let y = model.add_var("y", 0.0, 10.0);
    model.add_constraint("demand", LinearExpr::from(x) + y, Relation::Ge, 5.0);
    let template = ModelTemplate {
        model,
        slots: vec![
            Slot::Hour { hour: 0, market: Some(Market::DA) },
            Slot::Hour { hour: 1, market: Some(Market::ID) },
        ],
        cashflows: vec![
            Cashflow { hour: 0, market: Market::DA, energy: x.into() },
            Cashflow { hour: 1, market: Market::ID, energy: y.into() },
        ],
        fixed_cost: LinearExpr::new(),
        stage_rule: StageRule::TimeSplit,
        grid,
    };
    let mut first = PriceMap::new();
    first.insert(Market::DA, PriceSeries::new(Market::DA, 0, vec![50.0], Currency::USD));
    first.insert(Market::ID, PriceSeries::new(Market::ID, 0, vec![50.0], Currency::USD));
    let set = ScenarioSet::from_parts(1, vec![vec![[50.0, 20.0]], vec![[50.0, 70.0]]], vec![0.5, 0.5]).unwrap();
    (template, first, set)
}

pub fn toy_risk() -> RiskConfig {
    RiskConfig::neutral(0.5, RiskScope::Total)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
