pub mod bess;
pub mod cli;
pub mod evaluation;
pub mod ihs;
pub mod market_data;
pub mod rolling;
pub mod scenario_gen;
pub mod stochastic;
