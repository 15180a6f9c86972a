//! Grid battery arbitrage: fixed-size storage trading in the day-ahead and
//! intraday markets.
//!
//! Units: power in kW over one-hour steps, energy in kWh. Charge and
//! discharge are both nonnegative; cashflows convert to MWh so they can be
//! priced in currency per MWh. The efficiency applies on each leg, so a
//! full round trip returns `eta^2` of the energy drawn.

use serde::{Deserialize, Serialize};
use storage_risk_lp::{LinearExpr, Relation, Sense, VarId};
use thiserror::Error;

use crate::market_data::{Market, TimeGrid};
use crate::stochastic::{Cashflow, ModelTemplate, Slot, StageRule, StagedSolution, TemplateBuilder};

#[derive(Debug, Error)]
pub enum BessError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BessParams {
    /// Self-discharge per hour, fraction of the stored energy.
    pub sigma_batt: f64,
    /// Efficiency applied on the charge leg and again on the discharge leg.
    pub eta_batt: f64,
    /// Inverter rating, kW.
    pub c_inv: f64,
    /// kWh of capacity lost per kWh discharged.
    pub eta_deg: f64,
    /// Full cycles allowed per day.
    pub c_max: f64,
    /// Usable capacity before the first hour, kWh.
    pub soh0: f64,
    /// Stored energy before the first hour, kWh.
    pub soc0: f64,
    /// Require the final state of charge to be at least `soc0`.
    pub cyclic_soc: bool,
    /// One direction binary per hour shared by both markets instead of a
    /// pair per hour and market.
    pub aggregate_binaries: bool,
}

impl Default for BessParams {
    fn default() -> Self {
        Self {
            sigma_batt: 1e-4,
            eta_batt: 0.92,
            c_inv: 12_500.0,
            eta_deg: 5e-5,
            c_max: 1.5,
            soh0: 50_000.0,
            soc0: 0.0,
            cyclic_soc: false,
            aggregate_binaries: false,
        }
    }
}

impl BessParams {
    pub fn validate(&self) -> Result<(), BessError> {
        let bad = |m: String| Err(BessError::InvalidParams(m));
        if !(0.0..1.0).contains(&self.sigma_batt) {
            return bad(format!("sigma_batt = {} must lie in [0, 1)", self.sigma_batt));
        }
        if !(self.eta_batt > 0.0 && self.eta_batt <= 1.0) {
            return bad(format!("eta_batt = {} must lie in (0, 1]", self.eta_batt));
        }
        if !(self.c_inv > 0.0 && self.c_inv.is_finite()) {
            return bad(format!("c_inv = {} must be positive", self.c_inv));
        }
        if !(self.eta_deg >= 0.0 && self.eta_deg.is_finite()) {
            return bad(format!("eta_deg = {} must be nonnegative", self.eta_deg));
        }
        if !(self.c_max > 0.0 && self.c_max.is_finite()) {
            return bad(format!("c_max = {} must be positive", self.c_max));
        }
        if !(self.soh0 > 0.0 && self.soh0.is_finite()) {
            return bad(format!("soh0 = {} must be positive", self.soh0));
        }
        if !(self.soc0 >= 0.0 && self.soc0 <= self.soh0) {
            return bad(format!("soc0 = {} must lie in [0, soh0]", self.soc0));
        }
        Ok(())
    }
}

/// Direction binaries for one hour.
#[derive(Clone, Copy, Debug)]
pub enum Direction {
    /// `(I_c, I_d)` per market.
    PerMarket { charge: [VarId; 2], discharge: [VarId; 2] },
    /// 1 while charging, 0 while discharging.
    Aggregate(VarId),
}

#[derive(Clone, Debug)]
pub struct BessHour {
    pub hour: usize,
    pub charge: [VarId; 2],
    pub discharge: [VarId; 2],
    pub direction: Direction,
    pub soc: VarId,
    pub soh: VarId,
}

#[derive(Clone, Debug)]
pub struct BessLayout {
    pub hours: Vec<BessHour>,
}

#[derive(Clone, Debug)]
pub struct BessModel {
    pub template: ModelTemplate,
    pub layout: BessLayout,
    pub params: BessParams,
}

/// One scenario's dispatch read back from a solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    /// kW per hour, indexed `[hour][market]`.
    pub charge: Vec<[f64; 2]>,
    pub discharge: Vec<[f64; 2]>,
    pub soc: Vec<f64>,
    pub soh: Vec<f64>,
}

impl BessModel {
    pub fn dispatch(&self, x: &[f64]) -> Dispatch {
        let hs = &self.layout.hours;
        Dispatch {
            charge: hs.iter().map(|h| h.charge.map(|v| x[v.0])).collect(),
            discharge: hs.iter().map(|h| h.discharge.map(|v| x[v.0])).collect(),
            soc: hs.iter().map(|h| x[h.soc.0]).collect(),
            soh: hs.iter().map(|h| x[h.soh.0]).collect(),
        }
    }

    /// Right-hand side of the cycle cap for a given capacity trajectory.
    pub fn cycle_budget(&self, soh: &[f64]) -> f64 {
        self.params.c_max / 24.0 * soh.iter().sum::<f64>()
    }
}

pub fn build_bess_template(params: &BessParams, grid: &TimeGrid, stage_rule: StageRule) -> Result<BessModel, BessError> {
    params.validate()?;
    let p = params;
    let mut b = TemplateBuilder::default();
    let mut hours = Vec::with_capacity(grid.len());
    for t in grid.hours() {
        let charge = b.per_market("c", t, 0.0, p.c_inv);
        let discharge = b.per_market("d", t, 0.0, p.c_inv);
        let direction = if p.aggregate_binaries {
            Direction::Aggregate(b.binary(format!("u[{t}]"), Slot::Hour { hour: t, market: None }))
        } else {
            let pair = |b: &mut TemplateBuilder, name: &str| {
                Market::ALL.map(|mk| b.binary(format!("{name}[{t},{mk}]"), Slot::Hour { hour: t, market: Some(mk) }))
            };
            Direction::PerMarket {
                charge: pair(&mut b, "I_c"),
                discharge: pair(&mut b, "I_d"),
            }
        };
        let soc = b.hourly("SOC", t, 0.0, f64::INFINITY);
        let soh = b.hourly("SOH", t, 0.0, f64::INFINITY);
        hours.push(BessHour {
            hour: t,
            charge,
            discharge,
            direction,
            soc,
            soh,
        });
    }
    let TemplateBuilder { model: mut m, slots } = b;

    let sum2 = |v: [VarId; 2]| LinearExpr::from(v[0]) + v[1];
    let keep = 1.0 - p.sigma_batt;
    for (k, h) in hours.iter().enumerate() {
        let t = h.hour;
        let flows = sum2(h.charge) * p.eta_batt - sum2(h.discharge) * (1.0 / p.eta_batt);
        let soc_row = LinearExpr::from(h.soc) - flows;
        let soh_row = LinearExpr::from(h.soh) + sum2(h.discharge) * p.eta_deg;
        if k > 0 {
            let prev = &hours[k - 1];
            m.add_constraint(format!("soc[{t}]"), soc_row - prev.soc * keep, Relation::Eq, 0.0);
            m.add_constraint(format!("soh[{t}]"), soh_row - prev.soh, Relation::Eq, 0.0);
        } else {
            m.add_constraint(format!("soc[{t}]"), soc_row, Relation::Eq, keep * p.soc0);
            m.add_constraint(format!("soh[{t}]"), soh_row, Relation::Eq, p.soh0);
        }
        m.add_constraint(format!("soc_cap[{t}]"), h.soc - h.soh, Relation::Le, 0.0);
        match h.direction {
            Direction::PerMarket { charge, discharge } => {
                for i in 0..2 {
                    let mk = Market::ALL[i];
                    m.add_constraint(
                        format!("charge_on[{t},{mk}]"),
                        h.charge[i] - p.c_inv * charge[i],
                        Relation::Le,
                        0.0,
                    );
                    m.add_constraint(
                        format!("discharge_on[{t},{mk}]"),
                        h.discharge[i] - p.c_inv * discharge[i],
                        Relation::Le,
                        0.0,
                    );
                    m.add_constraint(
                        format!("exclusive[{t},{mk}]"),
                        charge[i] + discharge[i],
                        Relation::Le,
                        1.0,
                    );
                }
            }
            Direction::Aggregate(u) => {
                for i in 0..2 {
                    let mk = Market::ALL[i];
                    m.add_constraint(format!("charge_on[{t},{mk}]"), h.charge[i] - p.c_inv * u, Relation::Le, 0.0);
                    m.add_constraint(
                        format!("discharge_on[{t},{mk}]"),
                        h.discharge[i] + p.c_inv * u,
                        Relation::Le,
                        p.c_inv,
                    );
                }
            }
        }
        let net = sum2(h.charge) - sum2(h.discharge);
        m.add_constraint(format!("inverter_up[{t}]"), net.clone(), Relation::Le, p.c_inv);
        m.add_constraint(format!("inverter_down[{t}]"), net, Relation::Ge, -p.c_inv);
    }
    let throughput: LinearExpr = hours.iter().map(|h| sum2(h.discharge) * (1.0 / p.eta_batt)).sum();
    let budget: LinearExpr = hours.iter().map(|h| LinearExpr::from(h.soh) * (p.c_max / 24.0)).sum();
    m.add_constraint("cycles", throughput - budget, Relation::Le, 0.0);
    if p.cyclic_soc {
        let last = hours.last().map(|h| h.soc);
        if let Some(last) = last {
            m.add_constraint("cyclic_soc", last, Relation::Ge, p.soc0);
        }
    }

    let mut cashflows = Vec::with_capacity(2 * hours.len());
    for h in &hours {
        for mk in Market::ALL {
            let i = mk.index();
            cashflows.push(Cashflow {
                hour: h.hour,
                market: mk,
                energy: (LinearExpr::from(h.charge[i]) - h.discharge[i]) * 1e-3,
            });
        }
    }
    m.set_objective(LinearExpr::new(), Sense::Minimize);

    Ok(BessModel {
        template: ModelTemplate {
            model: m,
            slots,
            cashflows,
            fixed_cost: LinearExpr::new(),
            stage_rule,
            grid: *grid,
        },
        layout: BessLayout { hours },
        params: params.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusivityViolation {
    pub scenario: usize,
    pub hour: usize,
    pub market: Market,
    pub charge: f64,
    pub discharge: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BessAudit {
    /// Largest gap between reported and replayed state of charge, kWh.
    pub max_soc_error: f64,
    /// Same for state of health.
    pub max_soh_error: f64,
    /// Worst breach of `0 <= SOC <= SOH`, inverter limits and the band, kWh.
    pub max_bound_violation: f64,
    pub exclusivity: Vec<ExclusivityViolation>,
    /// Per scenario: discharge throughput and cycle budget, kWh.
    pub cycles: Vec<(f64, f64)>,
    /// Largest throughput excess over the budget.
    pub max_cycle_excess: f64,
}

impl BessAudit {
    pub fn max_violation(&self) -> f64 {
        self.max_soc_error
            .max(self.max_soh_error)
            .max(self.max_bound_violation)
            .max(self.max_cycle_excess)
    }

    pub fn is_clean(&self, tol: f64) -> bool {
        self.max_violation() <= tol && self.exclusivity.is_empty()
    }
}

/// Replays the storage recursions from the charge and discharge values of
/// every scenario and compares them with the reported trajectories.
/// `tol` (kW) is the level above which simultaneous charge and discharge
/// counts as an exclusivity violation.
pub fn bess_soc_audit(model: &BessModel, sol: &StagedSolution, tol: f64) -> BessAudit {
    let mut out = BessAudit::default();
    for (s, x) in sol.values.iter().enumerate() {
        audit_dispatch(&model.params, &model.dispatch(x), s, tol, &mut out);
    }
    out
}

/// Audits a single dispatch, appending to `out`.
pub fn audit_dispatch(p: &BessParams, d: &Dispatch, scenario: usize, tol: f64, out: &mut BessAudit) {
    let mut soc = p.soc0;
    let mut soh = p.soh0;
    let mut throughput = 0.0;
    let mut bound = 0.0f64;
    for t in 0..d.soc.len() {
        let (c, dis) = (d.charge[t], d.discharge[t]);
        let (cs, ds) = (c[0] + c[1], dis[0] + dis[1]);
        soc = (1.0 - p.sigma_batt) * soc + p.eta_batt * cs - ds / p.eta_batt;
        soh -= p.eta_deg * ds;
        throughput += ds / p.eta_batt;
        out.max_soc_error = out.max_soc_error.max((soc - d.soc[t]).abs());
        out.max_soh_error = out.max_soh_error.max((soh - d.soh[t]).abs());
        bound = bound.max(-d.soc[t]).max(d.soc[t] - d.soh[t]);
        bound = bound.max((cs - ds).abs() - p.c_inv);
        for i in 0..2 {
            bound = bound
                .max(-c[i])
                .max(-dis[i])
                .max(c[i] - p.c_inv)
                .max(dis[i] - p.c_inv);
            if c[i] > tol && dis[i] > tol {
                out.exclusivity.push(ExclusivityViolation {
                    scenario,
                    hour: t,
                    market: Market::ALL[i],
                    charge: c[i],
                    discharge: dis[i],
                });
            }
        }
        // Continue from the reported values so one slip does not cascade.
        soc = d.soc[t];
        soh = d.soh[t];
    }
    if p.cyclic_soc {
        if let Some(&last) = d.soc.last() {
            bound = bound.max(p.soc0 - last);
        }
    }
    let budget = p.c_max / 24.0 * d.soh.iter().sum::<f64>();
    out.max_bound_violation = out.max_bound_violation.max(bound);
    out.max_cycle_excess = out.max_cycle_excess.max(throughput - budget);
    out.cycles.push((throughput, budget));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hold(n: usize, soc: f64, soh: f64) -> Dispatch {
        Dispatch {
            charge: vec![[0.0; 2]; n],
            discharge: vec![[0.0; 2]; n],
            soc: vec![soc; n],
            soh: vec![soh; n],
        }
    }

    #[test]
    fn lossless_charge_adds_energy() {
        let p = BessParams {
            sigma_batt: 0.0,
            eta_batt: 1.0,
            eta_deg: 0.0,
            ..BessParams::default()
        };
        let mut d = hold(1, 10.0, p.soh0);
        d.charge[0][0] = 10.0;
        let mut a = BessAudit::default();
        audit_dispatch(&p, &d, 0, 1e-6, &mut a);
        assert!(a.max_soc_error < 1e-12);
    }

    #[test]
    fn simultaneous_flows_are_flagged() {
        let p = BessParams::default();
        let mut d = hold(2, 0.0, p.soh0);
        d.charge[1][1] = 5.0;
        d.discharge[1][1] = 5.0;
        let mut a = BessAudit::default();
        audit_dispatch(&p, &d, 3, 1e-6, &mut a);
        assert_eq!(a.exclusivity.len(), 1);
        assert_eq!(a.exclusivity[0].scenario, 3);
        assert_eq!(a.exclusivity[0].hour, 1);
        assert_eq!(a.exclusivity[0].market, Market::ID);
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            BessParams { eta_batt: 0.0, ..BessParams::default() },
            BessParams { sigma_batt: 1.0, ..BessParams::default() },
            BessParams { c_inv: -1.0, ..BessParams::default() },
            BessParams { soc0: 1e9, ..BessParams::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }
}
