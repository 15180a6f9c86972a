//! Closed-loop daily re-optimization of the battery.
//!
//! Each window solves a two-stage program in which the day-ahead dispatch
//! is here-and-now (day-ahead prices are cleared before the window starts)
//! and intraday dispatch is recourse against a fan of intraday price
//! scenarios. One scenario is then realized: its intraday dispatch is
//! committed together with the day-ahead dispatch, and the final state of
//! charge and health seed the next window.
//!
//! Cash columns are profits (revenue minus purchases); CVaR and expected
//! values are of the loss, as everywhere else.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use storage_risk_lp::Solver;
use thiserror::Error;

use crate::bess::{build_bess_template, BessError, BessParams, Dispatch};
use crate::evaluation::{evaluate, EvalError};
use crate::ihs::HOURS_PER_YEAR;
use crate::market_data::{DataError, Market, PriceMap, PriceSeries, TimeGrid};
use crate::scenario_gen::{sample_markets, ScenarioError, ScenarioSet};
use crate::stochastic::{assemble, RiskConfig, RiskScope, StageRule, StagedSolution, StochasticError};

#[derive(Debug, Error)]
pub enum RollingError {
    #[error("invalid rolling configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot realize a scenario from an empty set")]
    EmptySet,
    #[error("window {window} has no feasible schedule")]
    WindowInfeasible { window: usize },
    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<RollingError>,
    },
    #[error(transparent)]
    Bess(#[from] BessError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which member of the intraday fan plays out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizedRule {
    /// Uniform draw seeded per window.
    SeededUniform,
    /// Always the same scenario index.
    Index(usize),
    /// Draw a fresh trajectory from the generator and follow the closest
    /// scenario (Euclidean distance, ties to the lowest index); cash
    /// settles at the fresh prices.
    NearestToFreshDraw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingConfig {
    /// First hour of the first window.
    pub start: usize,
    /// Hours per window.
    pub window: usize,
    /// Total hours; must be a multiple of `window`.
    pub period: usize,
    pub n_s: usize,
    pub sigma_obs: f64,
    pub rule: RealizedRule,
    /// Annualized CVaR bound; each window gets `epsilon * window / 8760`.
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Also solve the risk-neutral, wait-and-see and expected-value
    /// problems per window to accumulate EVPI and VSS.
    pub metrics: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            start: 0,
            window: 24,
            period: 168,
            n_s: 10,
            sigma_obs: 20.0,
            rule: RealizedRule::SeededUniform,
            epsilon: f64::INFINITY,
            alpha: 0.95,
            seed: 0,
            metrics: false,
        }
    }
}

impl RollingConfig {
    pub fn validate(&self) -> Result<(), RollingError> {
        let bad = |m: String| Err(RollingError::InvalidConfig(m));
        if self.window == 0 || self.period == 0 || !self.period.is_multiple_of(self.window) {
            return bad(format!("window {} must divide period {}", self.window, self.period));
        }
        if self.n_s == 0 {
            return bad("n_s must be positive".into());
        }
        if !(self.sigma_obs >= 0.0 && self.sigma_obs.is_finite()) {
            return bad(format!("sigma_obs = {}", self.sigma_obs));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if self.epsilon.is_nan() || self.epsilon == f64::NEG_INFINITY {
            return bad(format!("epsilon = {}", self.epsilon));
        }
        if let RealizedRule::Index(i) = self.rule {
            if i >= self.n_s {
                return bad(format!("realized index {i} but only {} scenarios", self.n_s));
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> usize {
        self.period / self.window
    }

    /// The per-window share of the annual bound.
    pub fn window_epsilon(&self) -> f64 {
        self.epsilon * self.window as f64 / HOURS_PER_YEAR
    }

    /// Seed for everything random in window `w`.
    pub fn window_seed(&self, w: usize) -> u64 {
        self.seed ^ (w as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub window: usize,
    pub scenario: usize,
    pub da_cash: f64,
    pub id_cash: f64,
    pub soc_end: f64,
    pub soh_end: f64,
    pub window_cvar: f64,
    pub window_expected: f64,
}

/// Per-window stochastic metrics when [`RollingConfig::metrics`] is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub ws: f64,
    pub eev: f64,
    pub evpi: f64,
    pub vss: f64,
    pub vss_cvar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingSummary {
    pub epsilon: f64,
    pub window_epsilon: f64,
    pub windows: usize,
    pub sum_cvar: f64,
    pub sum_expected: f64,
    pub sum_ws: Option<f64>,
    pub sum_eev: Option<f64>,
    pub sum_evpi: Option<f64>,
    pub sum_vss: Option<f64>,
    pub sum_vss_cvar: Option<f64>,
    pub da_cash: f64,
    pub id_cash: f64,
    pub profit: f64,
}

#[derive(Clone, Debug)]
pub struct RollingRun {
    pub config: RollingConfig,
    /// State before the first window.
    pub initial: BessParams,
    pub entries: Vec<LedgerEntry>,
    /// Committed dispatch per window.
    pub committed: Vec<Dispatch>,
    pub metrics: Vec<WindowMetrics>,
    pub summary: RollingSummary,
}

/// The realized member of a fan and the intraday prices it settles at.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub scenario: usize,
    pub id_prices: Vec<f64>,
}

/// Picks the realized scenario. `nominal_id` is the generator's centre,
/// needed only for the fresh-draw rule.
pub fn select_realized_scenario(
    set: &ScenarioSet,
    rule: RealizedRule,
    seed: u64,
    nominal_id: &PriceSeries,
) -> Result<Realization, RollingError> {
    let n = set.len();
    if n == 0 {
        return Err(RollingError::EmptySet);
    }
    let id_of = |s: usize| set.series(s, Market::ID).values;
    match rule {
        RealizedRule::SeededUniform => {
            let s = ChaCha20Rng::seed_from_u64(seed).random_range(0..n);
            Ok(Realization {
                scenario: s,
                id_prices: id_of(s),
            })
        }
        RealizedRule::Index(s) => {
            if s >= n {
                return Err(RollingError::InvalidConfig(format!("realized index {s} but only {n} scenarios")));
            }
            Ok(Realization {
                scenario: s,
                id_prices: id_of(s),
            })
        }
        RealizedRule::NearestToFreshDraw => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_f00d);
            let fresh: Vec<f64> = (0..set.hours())
                .map(|h| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    nominal_id.at(set.start() + h).unwrap_or(f64::NAN) + set.sigma_obs * z
                })
                .collect();
            let mut best = (0, f64::INFINITY);
            for s in 0..n {
                let d: f64 = id_of(s).iter().zip(&fresh).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.1 {
                    best = (s, d);
                }
            }
            Ok(Realization {
                scenario: best.0,
                id_prices: fresh,
            })
        }
    }
}

fn window_prices(prices: &PriceMap, start: usize, len: usize) -> Result<PriceMap, RollingError> {
    let mut out = PriceMap::new();
    for mk in Market::ALL {
        let series = prices
            .get(&mk)
            .and_then(|p| p.window(start, len))
            .ok_or_else(|| {
                let hour = (start..start + len)
                    .find(|&h| prices.get(&mk).and_then(|p| p.at(h)).is_none())
                    .unwrap_or(start);
                DataError::MissingHour { hour, market: mk }
            })?;
        out.insert(mk, series);
    }
    Ok(out)
}

fn cash(prices: &[f64], charge: &[[f64; 2]], discharge: &[[f64; 2]], market: Market) -> f64 {
    let i = market.index();
    prices
        .iter()
        .zip(charge.iter().zip(discharge))
        .map(|(p, (c, d))| -p * (c[i] - d[i]) * 1e-3)
        .sum()
}

/// Runs every window in order. `prices` must hold nominal day-ahead and
/// intraday prices for the whole period; the day-ahead curve is taken as
/// cleared and the intraday curve is the centre of each window's fan.
pub fn run_rolling(
    config: &RollingConfig,
    prices: &PriceMap,
    bess: &BessParams,
    solver: &dyn Solver,
    jobs: usize,
) -> Result<RollingRun, RollingError> {
    config.validate()?;
    bess.validate()?;
    let eps_w = config.window_epsilon();
    let risk = RiskConfig {
        alpha: config.alpha,
        epsilon: eps_w,
        scope: RiskScope::Total,
    };
    let mut state = bess.clone();
    let mut entries = Vec::with_capacity(config.windows());
    let mut committed = Vec::with_capacity(config.windows());
    let mut metrics = Vec::new();

    for w in 0..config.windows() {
        let wrap = |e: RollingError| RollingError::Window {
            window: w,
            source: Box::new(e),
        };
        let t0 = config.start + w * config.window;
        let grid = TimeGrid::span(t0, config.window, 0)?;
        let nominal = window_prices(prices, t0, config.window).map_err(wrap)?;
        let seed = config.window_seed(w);
        let fan = sample_markets(&nominal, config.sigma_obs, config.n_s, seed, &[Market::ID])?;
        let model = build_bess_template(&state, &grid, StageRule::MarketSplit { first: Market::DA })?;

        let sol: StagedSolution = if config.metrics {
            let ev = evaluate(&model.template, &nominal, &fan, &risk, solver, jobs).map_err(|e| match e {
                EvalError::Stochastic(StochasticError::NotOptimal(_)) => RollingError::WindowInfeasible { window: w },
                other => wrap(other.into()),
            })?;
            let r = &ev.report;
            metrics.push(WindowMetrics {
                ws: r.ws,
                eev: r.eev,
                evpi: r.evpi,
                vss: r.vss,
                vss_cvar: r.vss_cvar,
            });
            ev.sp_eps
        } else {
            let program = assemble(&model.template, &nominal, &fan, &risk).map_err(|e| wrap(e.into()))?;
            program.solve_staged(solver).map_err(|e| match e {
                StochasticError::NotOptimal(_) => RollingError::WindowInfeasible { window: w },
                other => wrap(other.into()),
            })?
        };

        let real = select_realized_scenario(&fan, config.rule, seed, &nominal[&Market::ID])?;
        let disp = model.dispatch(&sol.values[real.scenario]);
        let da_cash = cash(&nominal[&Market::DA].values, &disp.charge, &disp.discharge, Market::DA);
        let id_cash = cash(&real.id_prices, &disp.charge, &disp.discharge, Market::ID);
        let soh_end = *disp.soh.last().expect("window has hours");
        let soc_end = disp.soc.last().expect("window has hours").clamp(0.0, soh_end);
        entries.push(LedgerEntry {
            window: w,
            scenario: real.scenario,
            da_cash,
            id_cash,
            soc_end,
            soh_end,
            window_cvar: sol.cvar,
            window_expected: sol.expected_cost,
        });
        committed.push(disp);
        state.soc0 = soc_end;
        state.soh0 = soh_end;
    }

    let sum = |f: fn(&LedgerEntry) -> f64| entries.iter().map(f).sum::<f64>();
    let msum = |f: fn(&WindowMetrics) -> f64| config.metrics.then(|| metrics.iter().map(f).sum::<f64>());
    let da_cash = sum(|e| e.da_cash);
    let id_cash = sum(|e| e.id_cash);
    let summary = RollingSummary {
        epsilon: config.epsilon,
        window_epsilon: eps_w,
        windows: entries.len(),
        sum_cvar: sum(|e| e.window_cvar),
        sum_expected: sum(|e| e.window_expected),
        sum_ws: msum(|m| m.ws),
        sum_eev: msum(|m| m.eev),
        sum_evpi: msum(|m| m.evpi),
        sum_vss: msum(|m| m.vss),
        sum_vss_cvar: msum(|m| m.vss_cvar),
        da_cash,
        id_cash,
        profit: da_cash + id_cash,
    };
    Ok(RollingRun {
        config: config.clone(),
        initial: bess.clone(),
        entries,
        committed,
        metrics,
        summary,
    })
}

impl RollingRun {
    pub fn write_ledger_csv<W: Write>(&self, out: W) -> Result<(), RollingError> {
        let mut wtr = csv::Writer::from_writer(out);
        for e in &self.entries {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Largest gap between each window's starting state and the previous
    /// window's reported end state, and between the committed trajectory
    /// and a replay of the committed flows from that start, in kWh.
    pub fn continuity_error(&self) -> f64 {
        let p = &self.initial;
        let mut worst = 0.0f64;
        let (mut soc, mut soh) = (p.soc0, p.soh0);
        for (e, d) in self.entries.iter().zip(&self.committed) {
            let (mut s, mut h) = (soc, soh);
            for t in 0..d.soc.len() {
                let cs = d.charge[t][0] + d.charge[t][1];
                let ds = d.discharge[t][0] + d.discharge[t][1];
                s = (1.0 - p.sigma_batt) * s + p.eta_batt * cs - ds / p.eta_batt;
                h -= p.eta_deg * ds;
                worst = worst.max((s - d.soc[t]).abs()).max((h - d.soh[t]).abs());
                s = d.soc[t];
                h = d.soh[t];
            }
            worst = worst.max((e.soc_end - s).abs()).max((e.soh_end - h).abs());
            soc = e.soc_end;
            soh = e.soh_end;
        }
        worst
    }
}
