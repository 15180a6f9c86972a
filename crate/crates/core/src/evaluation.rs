//! CVaR oracle, wait-and-see / expected-value metrics and frontier sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};
use storage_risk_lp::{LpError, Solver, Status};
use thiserror::Error;

use crate::market_data::PriceMap;
use crate::scenario_gen::ScenarioSet;
use crate::stochastic::{
    assemble, extract_solution, fix_first_stage, ModelTemplate, RiskConfig, RiskScope, StagedSolution,
    StochasticError,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad probabilities: {0}")]
    BadProbabilities(String),
    #[error("results come from different scenario sets")]
    MismatchedScenarioSets,
    #[error("epsilon ladder must be sorted descending")]
    UnsortedLadder,
    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: usize,
        #[source]
        source: StochasticError,
    },
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn check_distribution(values: &[f64], probs: &[f64], alpha: f64) -> Result<(), EvalError> {
    if values.is_empty() || values.len() != probs.len() {
        return Err(EvalError::BadProbabilities(format!(
            "{} values with {} probabilities",
            values.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(EvalError::BadProbabilities("weights must be nonnegative and sum to 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::BadProbabilities(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Right-tail CVaR of a discrete cost distribution by sorting: walk down
/// from the largest cost until a mass of `1 - alpha` is covered, taking
/// the boundary atom fractionally.
pub fn oracle_cvar(values: &[f64], probs: &[f64], alpha: f64) -> Result<f64, EvalError> {
    check_distribution(values, probs, alpha)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let tail = 1.0 - alpha;
    let mut mass = 0.0;
    let mut acc = 0.0;
    for &i in &order {
        let take = probs[i].min(tail - mass);
        if take <= 0.0 {
            break;
        }
        acc += take * values[i];
        mass += take;
    }
    // Rounding in the probabilities can leave a sliver uncovered.
    if mass < tail {
        acc += (tail - mass) * values[order[order.len() - 1]];
    }
    Ok(acc / tail)
}

/// `min_zeta zeta + 1/(1-alpha) * sum pi_s (v_s - zeta)^+`, evaluated at
/// every breakpoint. The function is convex and piecewise linear, so one
/// of the values is a minimizer.
pub fn cvar_by_minimization(values: &[f64], probs: &[f64], alpha: f64) -> Result<f64, EvalError> {
    check_distribution(values, probs, alpha)?;
    let k = 1.0 / (1.0 - alpha);
    let f = |z: f64| z + k * values.iter().zip(probs).map(|(v, p)| p * (v - z).max(0.0)).sum::<f64>();
    Ok(values.iter().map(|&z| f(z)).fold(f64::INFINITY, f64::min))
}

pub fn expectation(values: &[f64], probs: &[f64]) -> f64 {
    values.iter().zip(probs).map(|(v, p)| v * p).sum()
}

/// Runs `f` over `0..n` on up to `jobs` threads; results keep index order.
pub(crate) fn par_map<R: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every index visited")).collect()
}

/// Outcome of one deterministic or fixed-first-stage solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub status: String,
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WsResult {
    pub ws: f64,
    pub per_scenario: Vec<ScenarioOutcome>,
    pub fingerprint: String,
}

fn status_name(s: Status) -> String {
    format!("{s:?}").to_lowercase()
}

/// Wait-and-see value: every scenario solved on its own with its prices
/// known up front. An infeasible scenario makes the value infinite.
pub fn solve_ws(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    risk: &RiskConfig,
    solver: &dyn Solver,
    jobs: usize,
) -> Result<WsResult, EvalError> {
    let neutral = RiskConfig::neutral(risk.alpha, risk.scope);
    let outcomes = par_map(scenarios.len(), jobs, |s| -> Result<ScenarioOutcome, EvalError> {
        let single = scenarios.single(s);
        let program = assemble(template, first_prices, &single, &neutral)
            .map_err(|e| EvalError::Scenario { scenario: s, source: e })?;
        let sol = program
            .solve(solver)
            .map_err(|e| EvalError::Scenario { scenario: s, source: e })?;
        Ok(ScenarioOutcome {
            status: status_name(sol.status),
            objective: sol.is_optimal().then_some(sol.objective),
        })
    });
    let per_scenario = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let ws = per_scenario
        .iter()
        .zip(scenarios.probabilities())
        .map(|(o, p)| o.objective.map_or(f64::INFINITY, |v| v * p))
        .sum();
    Ok(WsResult {
        ws,
        per_scenario,
        fingerprint: scenarios.fingerprint(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EevResult {
    /// Expected cost of the expected-value design; infinite when the
    /// recourse problem is infeasible.
    pub eev: f64,
    pub recourse_infeasible: bool,
    /// First-stage values of the expected-value solution (template order).
    pub first_stage: Vec<f64>,
    pub fingerprint: String,
}

/// Solves on the per-cell mean scenario, fixes the first stage and prices
/// the result over the full set.
pub fn solve_eev(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    risk: &RiskConfig,
    solver: &dyn Solver,
) -> Result<EevResult, EvalError> {
    let neutral = RiskConfig::neutral(risk.alpha, risk.scope);
    let mean = scenarios.mean_scenario();
    let ev = assemble(template, first_prices, &mean, &neutral)?;
    let ev_sol = ev.solve_staged(solver)?;
    let x = ev_sol.values[0].clone();
    let full = assemble(template, first_prices, scenarios, &neutral)?;
    let fixed = fix_first_stage(&full, &x)?;
    let sol = fixed.solve(solver)?;
    let (eev, recourse_infeasible) = match sol.status {
        Status::Optimal => (extract_solution(&fixed, &sol)?.expected_cost, false),
        Status::Infeasible => (f64::INFINITY, true),
        s => return Err(StochasticError::NotOptimal(s).into()),
    };
    Ok(EevResult {
        eev,
        recourse_infeasible,
        first_stage: ev_sol.first_stage_values(),
        fingerprint: scenarios.fingerprint(),
    })
}

/// Non-finite floats as `"inf"`, `"-inf"` or `"nan"`, so reports survive a
/// JSON round trip.
mod lenient {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::fmt_num(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(D::Error::custom(format!("expected a number, got {t:?}"))),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(with = "lenient")]
    pub epsilon: f64,
    pub alpha: f64,
    pub scope: RiskScope,
    pub expected_cost: f64,
    pub cvar: f64,
    pub expected_cost_inf: f64,
    pub cvar_inf: f64,
    pub ws: f64,
    #[serde(with = "lenient")]
    pub eev: f64,
    pub eev_infeasible: bool,
    #[serde(with = "lenient")]
    pub evpi: f64,
    #[serde(with = "lenient")]
    pub vss: f64,
    #[serde(with = "lenient")]
    pub vss_cvar: f64,
    /// Signed `E[J_ID] / E[J_DA]` of operating cost; NaN when DA is zero.
    #[serde(with = "lenient")]
    pub market_cost_ratio: f64,
    pub v_s: Vec<f64>,
    pub pi_s: Vec<f64>,
    pub fingerprint: String,
}

/// Combines the pieces; the adjusted VSS adds, in this order, the CVaR
/// reduction and the expected-cost change bought by the bound.
pub fn compute_metrics(
    sp_eps: &StagedSolution,
    sp_inf: &StagedSolution,
    ws: &WsResult,
    eev: &EevResult,
) -> Result<MetricReport, EvalError> {
    let fp = &sp_eps.fingerprint;
    if &sp_inf.fingerprint != fp || &ws.fingerprint != fp || &eev.fingerprint != fp {
        return Err(EvalError::MismatchedScenarioSets);
    }
    let e = sp_eps.expected_cost;
    let evpi = e - ws.ws;
    let vss = eev.eev - e;
    let vss_cvar = vss + (sp_inf.cvar - sp_eps.cvar) + (sp_inf.expected_cost - sp_eps.expected_cost);
    let [da, id] = sp_eps.expected_market_costs();
    Ok(MetricReport {
        epsilon: sp_eps.epsilon,
        alpha: sp_eps.alpha,
        scope: sp_eps.scope,
        expected_cost: e,
        cvar: sp_eps.cvar,
        expected_cost_inf: sp_inf.expected_cost,
        cvar_inf: sp_inf.cvar,
        ws: ws.ws,
        eev: eev.eev,
        eev_infeasible: eev.recourse_infeasible,
        evpi,
        vss,
        vss_cvar,
        market_cost_ratio: if da == 0.0 { f64::NAN } else { id / da },
        v_s: sp_eps.v.clone(),
        pi_s: sp_eps.pi.clone(),
        fingerprint: fp.clone(),
    })
}

/// Everything `compute_metrics` needs, solved from scratch.
pub struct Evaluation {
    pub sp_eps: StagedSolution,
    pub sp_inf: StagedSolution,
    pub ws: WsResult,
    pub eev: EevResult,
    pub report: MetricReport,
}

pub fn evaluate(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    risk: &RiskConfig,
    solver: &dyn Solver,
    jobs: usize,
) -> Result<Evaluation, EvalError> {
    let neutral = RiskConfig::neutral(risk.alpha, risk.scope);
    let sp_inf = assemble(template, first_prices, scenarios, &neutral)?.solve_staged(solver)?;
    let sp_eps = if risk.epsilon.is_finite() {
        assemble(template, first_prices, scenarios, risk)?.solve_staged(solver)?
    } else {
        sp_inf.clone()
    };
    let ws = solve_ws(template, first_prices, scenarios, risk, solver, jobs)?;
    let eev = solve_eev(template, first_prices, scenarios, risk, solver)?;
    let report = compute_metrics(&sp_eps, &sp_inf, &ws, &eev)?;
    Ok(Evaluation {
        sp_eps,
        sp_inf,
        ws,
        eev,
        report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct FrontierPoint {
    pub epsilon: f64,
    pub status: PointStatus,
    pub expected_cost: f64,
    pub cvar: f64,
    pub solution: Option<StagedSolution>,
}

/// One independent solve per bound. Infeasible bounds come back flagged
/// with NaN costs.
pub fn frontier_sweep(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    base: &RiskConfig,
    ladder: &[f64],
    solver: &dyn Solver,
    jobs: usize,
) -> Result<Vec<FrontierPoint>, EvalError> {
    if ladder.windows(2).any(|w| !(w[0] >= w[1])) {
        return Err(EvalError::UnsortedLadder);
    }
    let points = par_map(ladder.len(), jobs, |i| -> Result<FrontierPoint, EvalError> {
        let eps = ladder[i];
        let program = assemble(template, first_prices, scenarios, &base.with_epsilon(eps))?;
        let sol = program.solve(solver)?;
        match sol.status {
            Status::Optimal => {
                let staged = extract_solution(&program, &sol)?;
                Ok(FrontierPoint {
                    epsilon: eps,
                    status: PointStatus::Optimal,
                    expected_cost: staged.expected_cost,
                    cvar: staged.cvar,
                    solution: Some(staged),
                })
            }
            Status::Infeasible => Ok(FrontierPoint {
                epsilon: eps,
                status: PointStatus::Infeasible,
                expected_cost: f64::NAN,
                cvar: f64::NAN,
                solution: None,
            }),
            s => Err(StochasticError::NotOptimal(s).into()),
        }
    });
    points.into_iter().collect()
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

/// Writes `epsilon,expected_cost,cvar,status`.
pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "expected_cost", "cvar", "status"])?;
    for p in points {
        let status = match p.status {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible => "infeasible",
        };
        w.write_record([fmt_num(p.epsilon), fmt_num(p.expected_cost), fmt_num(p.cvar), status.into()])?;
    }
    w.flush()?;
    Ok(())
}

/// Lowest CVaR any feasible plan can reach, or None when it is unbounded
/// below (risk can be sold off without limit).
pub fn minimum_cvar(
    template: &ModelTemplate,
    first_prices: &PriceMap,
    scenarios: &ScenarioSet,
    base: &RiskConfig,
    solver: &dyn Solver,
) -> Result<Option<f64>, EvalError> {
    let mut program = assemble(template, first_prices, scenarios, &base.with_epsilon(f64::INFINITY))?;
    program.set_mean_cvar_objective(0.0, 1.0);
    let sol = program.solve(solver)?;
    match sol.status {
        Status::Optimal => Ok(Some(extract_solution(&program, &sol)?.cvar)),
        Status::Unbounded => Ok(None),
        s => Err(StochasticError::NotOptimal(s).into()),
    }
}

impl From<LpError> for EvalError {
    fn from(e: LpError) -> Self {
        EvalError::Stochastic(StochasticError::Solver(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_distribution() {
        let v = [7.0; 4];
        let p = [0.25; 4];
        for a in [0.1, 0.5, 0.95] {
            assert!((oracle_cvar(&v, &p, a).unwrap() - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn top_five_of_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = vec![0.01; 100];
        assert!((oracle_cvar(&v, &p, 0.95).unwrap() - 98.0).abs() < 1e-9);
    }

    #[test]
    fn near_zero_alpha_is_mean() {
        assert!((oracle_cvar(&[2.0, 4.0], &[0.5, 0.5], 1e-9).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn breakpoint_minimum_matches_sort() {
        let v = [3.0, -1.0, 8.0, 2.5];
        let p = [0.1, 0.2, 0.3, 0.4];
        for a in [0.5, 0.65, 0.9] {
            let x = oracle_cvar(&v, &p, a).unwrap();
            let y = cvar_by_minimization(&v, &p, a).unwrap();
            assert!((x - y).abs() < 1e-12, "{a}: {x} vs {y}");
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(oracle_cvar(&[1.0, 2.0], &[0.5, 0.6], 0.9).is_err());
        assert!(oracle_cvar(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let out = par_map(37, 4, |i| i * i);
        assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
    }
}
