//! CVaR of a small loss distribution, by sorting and by minimizing over
//! the threshold.

use storage_risk::evaluation::{cvar_by_minimization, expectation, oracle_cvar};

fn main() {
    let losses = [120.0, -40.0, 15.0, 300.0, 60.0, -10.0];
    let probs = [0.1, 0.3, 0.2, 0.05, 0.15, 0.2];
    println!("expected loss {:.3}", expectation(&losses, &probs));
    for alpha in [0.5, 0.9, 0.95, 0.99] {
        let sorted = oracle_cvar(&losses, &probs, alpha).unwrap();
        let minimized = cvar_by_minimization(&losses, &probs, alpha).unwrap();
        println!("alpha {alpha:<4}  cvar {sorted:>9.3}  (minimized {minimized:.3})");
    }
}
