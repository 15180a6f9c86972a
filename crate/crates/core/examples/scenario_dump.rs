//! Synthetic prices for two days, a scenario set drawn around them and a
//! dump that reloads to the same fingerprint.

use storage_risk::market_data::{split_prices, synthetic_prices, Market, SyntheticProfile, TimeGrid};
use storage_risk::scenario_gen::{empirical_moments, sample_scenarios, ScenarioSet};

fn main() {
    let grid = TimeGrid::new(0, 12, 47).unwrap();
    let prices = synthetic_prices(&grid, &SyntheticProfile::default(), 1);
    let (_, observed) = split_prices(&prices, &grid).unwrap();
    let set = sample_scenarios(&observed, 20.0, 35, 7).unwrap();
    let m = empirical_moments(&set).unwrap();
    println!("{} scenarios over hours {}..={}", set.len(), set.start(), set.end());
    println!("hour {} mean {:?}, variance {:?}", m.start, m.mean[0], m.variance[0]);
    println!("first scenario, DA at hour 12: {:?}", set.price(0, 12, Market::DA));

    let dir = std::env::temp_dir().join("storage-risk-scenario-dump");
    std::fs::create_dir_all(&dir).unwrap();
    let (csv, json) = set.save_dump(&dir, "scenarios").unwrap();
    let back = ScenarioSet::load_dump(&csv, &json).unwrap();
    assert_eq!(back.fingerprint(), set.fingerprint());
    println!("dumped to {} (fingerprint {})", csv.display(), set.fingerprint());
}
