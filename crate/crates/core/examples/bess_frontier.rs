//! Battery schedule for two days with 12 hours committed up front: the
//! frontier from risk-neutral to the lowest reachable CVaR, written as CSV.

use storage_risk::bess::{build_bess_template, BessParams};
use storage_risk::evaluation::{frontier_sweep, minimum_cvar, write_frontier_csv};
use storage_risk::market_data::{split_prices, synthetic_prices, SyntheticProfile, TimeGrid};
use storage_risk::scenario_gen::sample_scenarios;
use storage_risk::stochastic::{assemble, RiskConfig, RiskScope, StageRule};
use storage_risk_lp::EmbeddedSolver;

fn main() {
    let grid = TimeGrid::new(0, 12, 47).unwrap();
    let model = build_bess_template(&BessParams::default(), &grid, StageRule::TimeSplit).unwrap();
    let prices = synthetic_prices(&grid, &SyntheticProfile::default(), 1);
    let (first, observed) = split_prices(&prices, &grid).unwrap();
    let set = sample_scenarios(&observed, 30.0, 6, 7).unwrap();
    let solver = EmbeddedSolver::default();
    let risk = RiskConfig::neutral(0.95, RiskScope::Total);

    let free = assemble(&model.template, &first, &set, &risk).unwrap().solve_staged(&solver).unwrap();
    let floor = minimum_cvar(&model.template, &first, &set, &risk, &solver).unwrap().expect("bounded");
    println!("CVaR ranges from {:.2} (risk-neutral) down to {floor:.2}", free.cvar);

    let mut ladder = vec![f64::INFINITY];
    ladder.extend([0.25, 0.5, 0.75, 1.0].map(|f| free.cvar + f * (floor - free.cvar)));
    let points = frontier_sweep(&model.template, &first, &set, &risk, &ladder, &solver, 1).unwrap();
    write_frontier_csv(&points, std::io::stdout()).unwrap();
}
