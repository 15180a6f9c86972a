//! EVPI, VSS and the risk-adjusted VSS for a battery day under a binding
//! CVaR bound.

use storage_risk::bess::{build_bess_template, BessParams};
use storage_risk::evaluation::{evaluate, minimum_cvar};
use storage_risk::market_data::{split_prices, synthetic_prices, SyntheticProfile, TimeGrid};
use storage_risk::scenario_gen::sample_scenarios;
use storage_risk::stochastic::{assemble, RiskConfig, RiskScope, StageRule};
use storage_risk_lp::EmbeddedSolver;

fn main() {
    let grid = TimeGrid::new(0, 6, 23).unwrap();
    let model = build_bess_template(&BessParams::default(), &grid, StageRule::TimeSplit).unwrap();
    let prices = synthetic_prices(&grid, &SyntheticProfile::default(), 1);
    let (first, observed) = split_prices(&prices, &grid).unwrap();
    let set = sample_scenarios(&observed, 30.0, 5, 7).unwrap();
    let solver = EmbeddedSolver::default();

    let neutral = RiskConfig::neutral(0.95, RiskScope::Total);
    let free = assemble(&model.template, &first, &set, &neutral).unwrap().solve_staged(&solver).unwrap();
    let floor = minimum_cvar(&model.template, &first, &set, &neutral, &solver).unwrap().expect("bounded");
    // halfway between risk-neutral and the lowest reachable tail
    let risk = neutral.with_epsilon(0.5 * (free.cvar + floor));
    let eval = evaluate(&model.template, &first, &set, &risk, &solver, 2).unwrap();
    println!("{}", serde_json::to_string_pretty(&eval.report).unwrap());
}
