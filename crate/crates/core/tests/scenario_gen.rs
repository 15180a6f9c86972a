use proptest::prelude::*;
use storage_risk::market_data::{synthetic_prices, Market, PriceMap, SyntheticProfile, TimeGrid};
use storage_risk::scenario_gen::{empirical_moments, sample_markets, sample_scenarios, ScenarioError, ScenarioSet};

fn nominal(hours: usize) -> PriceMap {
    let g = TimeGrid::span(24, hours, 0).unwrap();
    synthetic_prices(&g, &SyntheticProfile::default(), 11)
}

#[test]
fn same_seed_same_set() {
    let n = nominal(12);
    let a = sample_scenarios(&n, 20.0, 8, 7).unwrap();
    let b = sample_scenarios(&n, 20.0, 8, 7).unwrap();
    let c = sample_scenarios(&n, 20.0, 8, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_ne!(a.fingerprint(), c.fingerprint());
}

#[test]
fn zero_sigma_reproduces_nominal() {
    let n = nominal(6);
    let set = sample_scenarios(&n, 0.0, 3, 1).unwrap();
    for s in 0..3 {
        assert_eq!(set.scenario_prices(s), n);
    }
    assert_eq!(ScenarioSet::deterministic(&n).unwrap().len(), 1);
}

#[test]
fn moments_approach_the_generator() {
    let n = nominal(4);
    let sigma = 20.0;
    let set = sample_scenarios(&n, sigma, 4000, 3).unwrap();
    let m = empirical_moments(&set).unwrap();
    for (h, (mu, var)) in m.mean.iter().zip(&m.variance).enumerate() {
        for mk in Market::ALL {
            let k = mk.index();
            let nominal_price = n[&mk].values[h];
            // five standard errors of the mean, and a 10% band on the variance
            assert!((mu[k] - nominal_price).abs() < 5.0 * sigma / 4000f64.sqrt());
            assert!((var[k] / (sigma * sigma) - 1.0).abs() < 0.1, "{}", var[k]);
        }
    }
}

#[test]
fn intraday_only_fan_keeps_day_ahead() {
    let n = nominal(10);
    let set = sample_markets(&n, 30.0, 5, 2, &[Market::ID]).unwrap();
    for s in 0..5 {
        assert_eq!(set.series(s, Market::DA).values, n[&Market::DA].values);
        assert_ne!(set.series(s, Market::ID).values, n[&Market::ID].values);
    }
}

#[test]
fn dump_round_trips_and_reruns_byte_identical() {
    let n = nominal(5);
    let set = sample_scenarios(&n, 20.0, 4, 7).unwrap();
    let (mut c1, mut j1, mut c2, mut j2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    set.write_dump(&mut c1, &mut j1).unwrap();
    sample_scenarios(&n, 20.0, 4, 7).unwrap().write_dump(&mut c2, &mut j2).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(j1, j2);
    let back = ScenarioSet::read_dump(c1.as_slice(), j1.as_slice()).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.fingerprint(), set.fingerprint());
}

#[test]
fn corrupted_dump_is_rejected() {
    let n = nominal(2);
    let set = sample_scenarios(&n, 1.0, 2, 0).unwrap();
    let (mut c, mut j) = (Vec::new(), Vec::new());
    set.write_dump(&mut c, &mut j).unwrap();
    let mut text = String::from_utf8(c).unwrap();
    text.truncate(text.trim_end().rfind('\n').unwrap() + 1);
    assert!(ScenarioSet::read_dump(text.as_bytes(), j.as_slice()).is_err());
}

#[test]
fn bad_arguments() {
    let n = nominal(2);
    assert!(matches!(sample_scenarios(&n, 1.0, 0, 0), Err(ScenarioError::InvalidCount)));
    assert!(matches!(sample_scenarios(&n, -1.0, 2, 0), Err(ScenarioError::NegativeSigma(_))));
    let one = sample_scenarios(&n, 1.0, 1, 0).unwrap();
    assert!(matches!(empirical_moments(&one), Err(ScenarioError::InsufficientScenarios)));
    assert!(ScenarioSet::from_parts(0, vec![vec![[1.0, 1.0]]], vec![0.5]).is_err());
}

#[test]
fn mean_scenario_is_cellwise_average() {
    let set = ScenarioSet::from_parts(3, vec![vec![[1.0, 4.0]], vec![[3.0, 8.0]]], vec![0.25, 0.75]).unwrap();
    let m = set.mean_scenario();
    assert_eq!(m.len(), 1);
    assert_eq!(m.price(0, 3, Market::DA), Some(2.5));
    assert_eq!(m.price(0, 3, Market::ID), Some(7.0));
    assert_eq!(set.single(1).probabilities(), &[1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sets_are_well_formed(n_s in 1usize..20, hours in 1usize..30, sigma in 0.0f64..50.0, seed: u64) {
        let set = sample_scenarios(&nominal(hours), sigma, n_s, seed).unwrap();
        prop_assert_eq!(set.len(), n_s);
        prop_assert_eq!(set.hours(), hours);
        prop_assert!((set.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for s in 0..n_s {
            for h in set.start()..set.end() {
                prop_assert!(set.price(s, h, Market::ID).unwrap().is_finite());
            }
        }
    }
}
