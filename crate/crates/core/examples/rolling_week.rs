//! A week of battery operation in daily windows, each committing its
//! day-ahead trades before the intraday prices are known.

use storage_risk::bess::BessParams;
use storage_risk::market_data::{synthetic_prices, SyntheticProfile, TimeGrid};
use storage_risk::rolling::{run_rolling, RollingConfig};
use storage_risk_lp::EmbeddedSolver;

fn main() {
    let grid = TimeGrid::span(0, 168, 0).unwrap();
    let prices = synthetic_prices(&grid, &SyntheticProfile::default(), 1);
    let cfg = RollingConfig {
        n_s: 6,
        sigma_obs: 30.0,
        seed: 5,
        ..RollingConfig::default()
    };
    let run = run_rolling(&cfg, &prices, &BessParams::default(), &EmbeddedSolver::default(), 1).unwrap();
    run.write_ledger_csv(std::io::stdout()).unwrap();
    let s = &run.summary;
    println!("profit {:.2} (DA {:.2}, ID {:.2}), sum CVaR {:.2}", s.profit, s.da_cash, s.id_cash, s.sum_cvar);
    println!("state hand-off error {:.1e}", run.continuity_error());
}
