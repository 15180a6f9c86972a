mod common;

use common::solver;
use storage_risk::bess::{audit_dispatch, BessAudit, BessParams};
use storage_risk::market_data::{synthetic_prices, PriceMap, SyntheticProfile, TimeGrid};
use storage_risk::rolling::{run_rolling, RealizedRule, RollingConfig, RollingError};

fn three_days() -> (RollingConfig, PriceMap) {
    let cfg = RollingConfig {
        start: 24,
        period: 72,
        n_s: 4,
        sigma_obs: 30.0,
        seed: 3,
        ..RollingConfig::default()
    };
    let grid = TimeGrid::span(24, 72, 0).unwrap();
    (cfg, synthetic_prices(&grid, &SyntheticProfile::default(), 2))
}

#[test]
fn state_carries_between_windows() {
    let (cfg, prices) = three_days();
    let run = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap();
    assert_eq!(run.entries.len(), 3);
    assert_eq!(run.committed.len(), 3);
    assert!(run.continuity_error() <= 1e-6);
    let mut params = run.initial.clone();
    for (w, (e, d)) in run.entries.iter().zip(&run.committed).enumerate() {
        let mut a = BessAudit::default();
        audit_dispatch(&params, d, w, 1e-6, &mut a);
        assert!(a.is_clean(1e-6), "window {w}: {a:?}");
        assert_eq!(*d.soh.last().unwrap(), e.soh_end);
        params.soc0 = e.soc_end;
        params.soh0 = e.soh_end;
    }
    let s = &run.summary;
    assert!((s.profit - (s.da_cash + s.id_cash)).abs() < 1e-9);
    assert!(s.sum_evpi.is_none());
}

#[test]
fn window_cvar_respects_the_prorated_bound() {
    let (mut cfg, prices) = three_days();
    let free = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap();
    let worst = free.entries.iter().map(|e| e.window_cvar).fold(f64::NEG_INFINITY, f64::max);
    // annualized so that the worst window is pushed a little further
    cfg.epsilon = worst * 1.02 * 8760.0 / 24.0;
    let eps_w = cfg.window_epsilon();
    assert!((eps_w - worst * 1.02).abs() < 1e-9 * worst.abs());
    let bound = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap();
    for e in &bound.entries {
        assert!(e.window_cvar <= eps_w + 1e-6 * (1.0 + eps_w.abs()), "{e:?}");
    }
    assert!(bound.summary.sum_cvar <= free.summary.sum_cvar + 1e-6);
}

#[test]
fn unreachable_bound_halts_at_the_window() {
    let (mut cfg, prices) = three_days();
    cfg.epsilon = -1e9;
    let e = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap_err();
    assert!(matches!(e, RollingError::WindowInfeasible { window: 0 }), "{e}");
}

#[test]
fn metrics_accumulate_per_window() {
    let (mut cfg, prices) = three_days();
    cfg.metrics = true;
    cfg.period = 48;
    let run = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 2).unwrap();
    assert_eq!(run.metrics.len(), 2);
    let s = &run.summary;
    let evpi: f64 = run.metrics.iter().map(|m| m.evpi).sum();
    assert_eq!(s.sum_evpi, Some(evpi));
    for m in &run.metrics {
        assert!(m.evpi >= -1e-6 && m.vss >= -1e-6);
        assert_eq!(m.vss_cvar, m.vss);
    }
}

#[test]
fn runs_are_reproducible_across_rules_and_workers() {
    let (mut cfg, prices) = three_days();
    for rule in [RealizedRule::SeededUniform, RealizedRule::Index(2), RealizedRule::NearestToFreshDraw] {
        cfg.rule = rule;
        let a = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap();
        let b = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 3).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.summary, b.summary);
        if let RealizedRule::Index(i) = rule {
            assert!(a.entries.iter().all(|e| e.scenario == i));
        }
    }
}

#[test]
fn ledger_has_one_row_per_window() {
    let (cfg, prices) = three_days();
    let run = run_rolling(&cfg, &prices, &BessParams::default(), &solver(), 1).unwrap();
    let mut buf = Vec::new();
    run.write_ledger_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "window,scenario,da_cash,id_cash,soc_end,soh_end,window_cvar,window_expected"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn prices_must_cover_the_period() {
    let (cfg, _) = three_days();
    let short = synthetic_prices(&TimeGrid::span(24, 30, 0).unwrap(), &SyntheticProfile::default(), 2);
    assert!(run_rolling(&cfg, &short, &BessParams::default(), &solver(), 1).is_err());
}
