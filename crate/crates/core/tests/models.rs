mod common;

use common::{close, solver};
use storage_risk::bess::{audit_dispatch, bess_soc_audit, build_bess_template, BessAudit, BessModel, BessParams};
use storage_risk::evaluation::{frontier_sweep, PointStatus};
use storage_risk::ihs::{
    build_ihs_template, ihs_mass_energy_audit, CapacityBounds, IhsCostParams, IhsError, IhsModel, IhsParams, Unit,
};
use storage_risk::market_data::{split_prices, synthetic_prices, PriceMap, SyntheticProfile, TimeGrid};
use storage_risk::scenario_gen::{sample_scenarios, ScenarioSet};
use storage_risk::stochastic::{assemble, RiskConfig, RiskScope, StageRule, StagedSolution};

fn inputs(grid: &TimeGrid, sigma: f64, n_s: usize) -> (PriceMap, ScenarioSet) {
    let prices = synthetic_prices(grid, &SyntheticProfile::default(), 1);
    let (first, obs) = split_prices(&prices, grid).unwrap();
    (first, sample_scenarios(&obs, sigma, n_s, 7).unwrap())
}

fn ihs_day() -> (IhsModel, PriceMap, ScenarioSet) {
    let grid = TimeGrid::span(0, 24, 0).unwrap();
    let m = build_ihs_template(&IhsParams::default(), &IhsCostParams::default(), &grid, &CapacityBounds::default())
        .unwrap();
    let (first, set) = inputs(&grid, 20.0, 4);
    (m, first, set)
}

fn check_ihs(m: &IhsModel, sol: &StagedSolution) {
    let a = ihs_mass_energy_audit(m, sol, 1e-6);
    assert!(a.max_violation <= 1e-6, "{:?}", a.violations.first());
    assert!(a.min_dri_margin >= -1e-6);
    let p = &m.params;
    assert!(a.min_pressure >= p.p_stor_lb - 1e-6 && a.max_pressure <= p.p_stor_ub + 1e-6);
}

#[test]
fn ihs_day_balances() {
    let (m, first, set) = ihs_day();
    let risk = RiskConfig::neutral(0.95, RiskScope::SecondStage);
    let sol = assemble(&m.template, &first, &set, &risk).unwrap().solve_staged(&solver()).unwrap();
    check_ihs(&m, &sol);
    // no first-stage hours, so the first-stage cost is the capital charge
    let caps = m.capacities(&sol);
    assert!(close(sol.first_cost, m.capital_cost(&caps), 1e-9));
    assert!(caps[Unit::Elec as usize] > 0.0);
    assert!(caps[Unit::Comp as usize] >= 100.0 - 1e-9);
}

#[test]
fn ihs_capacities_grow_as_the_bound_tightens() {
    let (m, first, set) = ihs_day();
    let base = RiskConfig::neutral(0.95, RiskScope::SecondStage);
    let inf = assemble(&m.template, &first, &set, &base).unwrap().solve_staged(&solver()).unwrap();
    let ladder: Vec<f64> = [None, Some(0.01), Some(0.02), Some(0.03)]
        .iter()
        .map(|f| f.map_or(f64::INFINITY, |f| inf.cvar * (1.0 - f)))
        .collect();
    let pts = frontier_sweep(&m.template, &first, &set, &base, &ladder, &solver(), 1).unwrap();
    let mut prev: Option<([f64; 5], f64, f64)> = None;
    for (p, eps) in pts.iter().zip(&ladder) {
        assert_eq!(p.status, PointStatus::Optimal);
        let sol = p.solution.as_ref().unwrap();
        check_ihs(&m, sol);
        assert!(p.cvar <= eps + 1e-6 * (1.0 + eps.abs()));
        let caps = m.capacities(sol);
        let cap = m.capital_cost(&caps);
        if let Some((pc, pcap, pe)) = prev {
            assert!(p.expected_cost >= pe - 1e-6 * pe.abs());
            assert!(cap >= pcap - 1e-6 * pcap.abs());
            // individual units may trade off; the electrolyzer leads the build-out
            let k = Unit::Elec as usize;
            assert!(caps[k] >= pc[k] - 1e-6 * (1.0 + pc[k]), "{} < {}", caps[k], pc[k]);
        }
        prev = Some((caps, cap, p.expected_cost));
    }
}

#[test]
fn ihs_rejects_bad_inputs() {
    let grid = TimeGrid::span(0, 24, 0).unwrap();
    let mut b = CapacityBounds::default();
    b.set(Unit::Stor, 5.0, 1.0);
    let r = build_ihs_template(&IhsParams::default(), &IhsCostParams::default(), &grid, &b);
    assert!(matches!(r, Err(IhsError::InvalidBounds { unit: "stor", .. })));
    let p = IhsParams {
        p_stor_lb: 50.0,
        p_stor_ub: 10.0,
        ..IhsParams::default()
    };
    let r = build_ihs_template(&p, &IhsCostParams::default(), &grid, &CapacityBounds::default());
    assert!(matches!(r, Err(IhsError::InvalidParams(_))));
}

#[test]
fn ihs_cyclic_inventory_ends_full() {
    let grid = TimeGrid::span(0, 12, 0).unwrap();
    let params = IhsParams {
        initial_inventory: 500.0,
        cyclic_inventory: true,
        ..IhsParams::default()
    };
    let m = build_ihs_template(&params, &IhsCostParams::default(), &grid, &CapacityBounds::default()).unwrap();
    let (first, set) = inputs(&grid, 20.0, 2);
    let sol = assemble(&m.template, &first, &set, &RiskConfig::neutral(0.95, RiskScope::SecondStage))
        .unwrap()
        .solve_staged(&solver())
        .unwrap();
    check_ihs(&m, &sol);
    let last = m.layout.hours.last().unwrap().inventory;
    for x in &sol.values {
        assert!(x[last.0] >= 500.0 - 1e-6);
    }
}

fn bess_two_days(params: &BessParams, n_s: usize) -> (BessModel, PriceMap, ScenarioSet) {
    let grid = TimeGrid::new(0, 12, 47).unwrap();
    let m = build_bess_template(params, &grid, StageRule::TimeSplit).unwrap();
    let (first, set) = inputs(&grid, 30.0, n_s);
    (m, first, set)
}

fn check_bess(m: &BessModel, sol: &StagedSolution) -> BessAudit {
    let a = bess_soc_audit(m, sol, 1e-6);
    assert!(a.is_clean(1e-6), "{a:?}");
    assert!(a.exclusivity.is_empty());
    for (used, budget) in &a.cycles {
        assert!(used <= &(budget + 1e-6));
    }
    a
}

#[test]
fn battery_dispatch_replays() {
    let (m, first, set) = bess_two_days(&BessParams::default(), 3);
    let sol = assemble(&m.template, &first, &set, &RiskConfig::neutral(0.95, RiskScope::Total))
        .unwrap()
        .solve_staged(&solver())
        .unwrap();
    let a = check_bess(&m, &sol);
    assert_eq!(a.cycles.len(), 3);
    // arbitrage on a daily price cycle pays
    assert!(sol.expected_cost < 0.0);
    let d = m.dispatch(&sol.values[0]);
    assert_eq!(d.soc.len(), 48);
    assert!(d.soh.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn battery_break_even_bound() {
    let (m, first, set) = bess_two_days(&BessParams::default(), 3);
    let risk = RiskConfig::neutral(0.95, RiskScope::Total).with_epsilon(0.0);
    let sol = assemble(&m.template, &first, &set, &risk).unwrap().solve_staged(&solver()).unwrap();
    check_bess(&m, &sol);
    assert!(sol.cvar <= 1e-6);
}

#[test]
fn aggregate_binaries_and_cyclic_soc() {
    let params = BessParams {
        aggregate_binaries: true,
        cyclic_soc: true,
        soc0: 20000.0,
        ..BessParams::default()
    };
    let (m, first, set) = bess_two_days(&params, 2);
    let sol = assemble(&m.template, &first, &set, &RiskConfig::neutral(0.95, RiskScope::Total))
        .unwrap()
        .solve_staged(&solver())
        .unwrap();
    check_bess(&m, &sol);
    for x in &sol.values {
        assert!(*m.dispatch(x).soc.last().unwrap() >= 20000.0 - 1e-6);
    }
}

#[test]
fn audit_catches_a_broken_dispatch() {
    let (m, first, set) = bess_two_days(&BessParams::default(), 1);
    let sol = assemble(&m.template, &first, &set, &RiskConfig::neutral(0.95, RiskScope::Total))
        .unwrap()
        .solve_staged(&solver())
        .unwrap();
    let mut d = m.dispatch(&sol.values[0]);
    d.soc[10] += 5.0;
    let mut a = BessAudit::default();
    audit_dispatch(&m.params, &d, 0, 1e-6, &mut a);
    assert!(a.max_soc_error >= 5.0 - 1e-9);
    assert!(!a.is_clean(1e-6));
}

#[test]
fn battery_rejects_bad_parameters() {
    let grid = TimeGrid::span(0, 4, 0).unwrap();
    for p in [
        BessParams { eta_batt: 1.5, ..BessParams::default() },
        BessParams { soc0: 1e9, ..BessParams::default() },
        BessParams { c_inv: -1.0, ..BessParams::default() },
    ] {
        assert!(build_bess_template(&p, &grid, StageRule::TimeSplit).is_err(), "{p:?}");
    }
}
