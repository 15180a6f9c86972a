//! Integrated hydrogen system: electrolyzer, pressurized storage, furnace
//! heater, compressor and fuel cell sized together with their dispatch.
//!
//! Units: power in MW, hydrogen flows in kg/h, inventory in kg, one-hour
//! steps. Grid-facing powers are split per market; consumption is positive
//! and fuel-cell output negative. Storage capacity is the maximum stored
//! mass in kg.

use serde::{Deserialize, Serialize};
use storage_risk_lp::{LinearExpr, Relation, Sense, VarId};
use thiserror::Error;

use crate::market_data::{Market, TimeGrid};
use crate::stochastic::{Cashflow, ModelTemplate, Slot, StageRule, StagedSolution, TemplateBuilder};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Error)]
pub enum IhsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid capacity bounds for {unit}: [{lower}, {upper}]")]
    InvalidBounds { unit: &'static str, lower: f64, upper: f64 },
    #[error("the ramp limit needs at least two hours, grid has {0}")]
    GridTooShort(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IhsParams {
    pub l_ac_dc: f64,
    pub l_aux_elec: f64,
    pub l_deg_elec: f64,
    /// MW of DC power per kg/h of hydrogen.
    pub l_elec: f64,
    /// MPa.
    pub p_elec: f64,
    /// K.
    pub t_stor: f64,
    pub p_stor_lb: f64,
    pub p_stor_ub: f64,
    pub z: f64,
    /// MJ/kg.
    pub e_p: f64,
    pub eta_heat: f64,
    pub eta_comp: f64,
    pub l_dc_ac: f64,
    pub l_aux_fc: f64,
    pub l_deg_fc: f64,
    /// Cell voltage, V.
    pub v_cell: f64,
    /// Electrolyzer outlet temperature used by the compressor duty, K.
    pub t_elec: f64,
    /// J/(mol K).
    pub r_gas: f64,
    /// C/mol.
    pub faraday: f64,
    /// kg/mol.
    pub m_h2: f64,
    /// Minimum hydrogen feed to the furnace heater each hour.
    pub dri_demand: f64,
    /// Ramp limit on DC electrolyzer power as a fraction of capacity.
    pub ramp_fraction: f64,
    /// Inventory before the first hour, kg.
    pub initial_inventory: f64,
    /// Require the final inventory to be at least the initial one.
    pub cyclic_inventory: bool,
}

impl Default for IhsParams {
    fn default() -> Self {
        Self {
            l_ac_dc: 1.05,
            l_aux_elec: 0.05,
            l_deg_elec: 0.9142,
            l_elec: 0.05,
            p_elec: 1.0,
            t_stor: 298.0,
            p_stor_lb: 2.0,
            p_stor_ub: 20.0,
            z: 1.07,
            e_p: 11.82,
            eta_heat: 0.75,
            eta_comp: 0.7,
            l_dc_ac: 0.95,
            l_aux_fc: 0.05,
            l_deg_fc: 0.9142,
            v_cell: 0.7,
            t_elec: 298.0,
            r_gas: 8.314_462_618,
            faraday: 96_485.332_12,
            m_h2: 2.015_88e-3,
            dri_demand: 150_000.0,
            ramp_fraction: 0.2,
            initial_inventory: 0.0,
            cyclic_inventory: false,
        }
    }
}

impl IhsParams {
    pub fn validate(&self) -> Result<(), IhsError> {
        let bad = |m: String| Err(IhsError::InvalidParams(m));
        for (name, v) in [
            ("l_aux_elec", self.l_aux_elec),
            ("l_deg_elec", self.l_deg_elec),
            ("eta_heat", self.eta_heat),
            ("eta_comp", self.eta_comp),
            ("l_dc_ac", self.l_dc_ac),
            ("l_aux_fc", self.l_aux_fc),
            ("l_deg_fc", self.l_deg_fc),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1]"));
            }
        }
        if !(self.l_ac_dc >= 1.0) {
            return bad(format!("l_ac_dc = {} must be at least 1", self.l_ac_dc));
        }
        if !(self.p_stor_lb < self.p_stor_ub && self.p_stor_lb >= 0.0) {
            return bad("storage pressure bounds must satisfy 0 <= lb < ub".into());
        }
        if !(self.l_dc_ac > self.l_aux_fc) {
            return bad("inverter efficiency must exceed fuel-cell auxiliary load".into());
        }
        for (name, v) in [
            ("l_elec", self.l_elec),
            ("p_elec", self.p_elec),
            ("t_stor", self.t_stor),
            ("z", self.z),
            ("e_p", self.e_p),
            ("v_cell", self.v_cell),
            ("t_elec", self.t_elec),
            ("r_gas", self.r_gas),
            ("faraday", self.faraday),
            ("m_h2", self.m_h2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.dri_demand >= 0.0) || !(self.ramp_fraction >= 0.0) || !(self.initial_inventory >= 0.0) {
            return bad("demand, ramp fraction and initial inventory must be nonnegative".into());
        }
        Ok(())
    }

    /// AC power drawn per MW of DC electrolyzer power.
    pub fn rectifier_factor(&self) -> f64 {
        self.l_ac_dc + self.l_aux_elec
    }

    /// kg/h of hydrogen per MW of DC power.
    pub fn production_factor(&self) -> f64 {
        self.l_deg_elec / self.l_elec
    }

    /// Heater MW per kg/h of hydrogen fed.
    pub fn heater_factor(&self) -> f64 {
        self.e_p / (3600.0 * self.eta_heat)
    }

    /// Compressor MW per kg/h compressed, linearized at the pressure centroid.
    pub fn compressor_factor(&self) -> f64 {
        let ratio = (self.p_stor_lb + self.p_stor_ub) / (2.0 * self.p_elec);
        self.r_gas * self.t_elec / self.eta_comp * ratio.ln() / (self.m_h2 * 3600.0) / 1e6
    }

    /// Fuel-cell DC MW per kg/h of hydrogen consumed.
    pub fn fuel_cell_factor(&self) -> f64 {
        2.0 * self.faraday * self.v_cell * self.l_deg_fc / (self.m_h2 * 3600.0) / 1e6
    }

    /// AC output per MW of DC fuel-cell output.
    pub fn inverter_factor(&self) -> f64 {
        self.l_dc_ac - self.l_aux_fc
    }

    /// Hydrogen density at the upper storage pressure, kg/m3.
    pub fn density_at_ub(&self) -> f64 {
        self.p_stor_ub * 1e6 * self.m_h2 / (self.z * self.r_gas * self.t_stor)
    }

    /// Storage pressure for inventory `i` in a vessel sized for `cap` kg.
    pub fn pressure(&self, i: f64, cap: f64) -> f64 {
        if cap <= 0.0 {
            return self.p_stor_lb;
        }
        let pa = self.z * i * self.density_at_ub() * self.r_gas * self.t_stor / (self.m_h2 * cap);
        self.p_stor_lb + pa / 1e6
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostItem {
    /// $/kW for power units, $/kg for storage.
    pub p_cap: f64,
    /// Annualizing factor.
    pub w: f64,
    /// Yearly maintenance in the same unit as `p_cap`.
    pub o: f64,
}

impl CostItem {
    pub fn annual_rate(&self) -> f64 {
        self.p_cap * self.w + self.o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IhsCostParams {
    pub elec_stack: CostItem,
    pub elec_aux: CostItem,
    pub storage: CostItem,
    pub heater: CostItem,
    pub compressor: CostItem,
    pub fc_stack: CostItem,
    pub fc_aux: CostItem,
    /// Share of a year's capital charge billed to the horizon; None means
    /// `hours / 8760`.
    pub capital_fraction: Option<f64>,
}

impl Default for IhsCostParams {
    fn default() -> Self {
        let c = |p_cap, w, o| CostItem { p_cap, w, o };
        Self {
            elec_stack: c(150.0, 0.13, 2.0),
            elec_aux: c(250.0, 0.08, 0.0),
            storage: c(1000.0, 0.1, 10.0),
            heater: c(50.0, 0.13, 1.0),
            compressor: c(50.0, 0.13, 1.0),
            fc_stack: c(150.0, 0.13, 2.0),
            fc_aux: c(250.0, 0.08, 0.0),
            capital_fraction: None,
        }
    }
}

impl IhsCostParams {
    pub fn validate(&self) -> Result<(), IhsError> {
        let items = [
            self.elec_stack,
            self.elec_aux,
            self.storage,
            self.heater,
            self.compressor,
            self.fc_stack,
            self.fc_aux,
        ];
        if items.iter().any(|c| !(c.p_cap >= 0.0 && c.w >= 0.0 && c.o >= 0.0)) {
            return Err(IhsError::InvalidParams("capital cost items must be nonnegative".into()));
        }
        if self.capital_fraction.is_some_and(|f| !(f >= 0.0)) {
            return Err(IhsError::InvalidParams("capital fraction must be nonnegative".into()));
        }
        Ok(())
    }

    /// Yearly charge per unit of capacity, in unit order
    /// (elec $/MW, stor $/kg, heat, comp, fc $/MW).
    pub fn annual_rates(&self) -> [f64; 5] {
        [
            1000.0 * (self.elec_stack.annual_rate() + self.elec_aux.annual_rate()),
            self.storage.annual_rate(),
            1000.0 * self.heater.annual_rate(),
            1000.0 * self.compressor.annual_rate(),
            1000.0 * (self.fc_stack.annual_rate() + self.fc_aux.annual_rate()),
        ]
    }

    pub fn fraction_for(&self, grid: &TimeGrid) -> f64 {
        self.capital_fraction.unwrap_or(grid.len() as f64 / HOURS_PER_YEAR)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Elec,
    Stor,
    Heat,
    Comp,
    Fc,
}

impl Unit {
    pub const ALL: [Unit; 5] = [Unit::Elec, Unit::Stor, Unit::Heat, Unit::Comp, Unit::Fc];

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Elec => "elec",
            Unit::Stor => "stor",
            Unit::Heat => "heat",
            Unit::Comp => "comp",
            Unit::Fc => "fc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

/// Capacity limits in MW (storage in kg), indexed like [`Unit::ALL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBounds(pub [Bound; 5]);

impl Default for CapacityBounds {
    fn default() -> Self {
        let free = Bound {
            lower: 0.0,
            upper: f64::INFINITY,
        };
        let mut b = [free; 5];
        b[Unit::Comp as usize].lower = 100.0;
        Self(b)
    }
}

impl CapacityBounds {
    pub fn get(&self, u: Unit) -> Bound {
        self.0[u as usize]
    }

    pub fn set(&mut self, u: Unit, lower: f64, upper: f64) {
        self.0[u as usize] = Bound { lower, upper };
    }
}

/// Template variables for one hour.
#[derive(Clone, Debug)]
pub struct IhsHour {
    pub hour: usize,
    pub d_elec_ac: [VarId; 2],
    pub d_elec_dc: VarId,
    pub f_elec: VarId,
    pub f_stor_in: VarId,
    pub f_heat_elec: VarId,
    pub f_stor_out: VarId,
    pub f_fc: VarId,
    pub f_heat_stor: VarId,
    pub inventory: VarId,
    pub d_heat: [VarId; 2],
    pub d_comp: [VarId; 2],
    pub d_fc_dc: VarId,
    pub d_fc_ac: [VarId; 2],
}

#[derive(Clone, Debug)]
pub struct IhsLayout {
    /// Capacities in [`Unit::ALL`] order.
    pub capacity: [VarId; 5],
    pub hours: Vec<IhsHour>,
}

#[derive(Clone, Debug)]
pub struct IhsModel {
    pub template: ModelTemplate,
    pub layout: IhsLayout,
    pub params: IhsParams,
    pub costs: IhsCostParams,
}

impl IhsModel {
    /// Capital charge billed to the horizon for the given capacities.
    pub fn capital_cost(&self, capacities: &[f64; 5]) -> f64 {
        let f = self.costs.fraction_for(&self.template.grid);
        self.costs.annual_rates().iter().zip(capacities).map(|(r, c)| f * r * c).sum()
    }

    pub fn capacities(&self, sol: &StagedSolution) -> [f64; 5] {
        self.layout.capacity.map(|id| sol.values[0][id.0])
    }
}

pub fn build_ihs_template(
    params: &IhsParams,
    costs: &IhsCostParams,
    grid: &TimeGrid,
    bounds: &CapacityBounds,
) -> Result<IhsModel, IhsError> {
    params.validate()?;
    costs.validate()?;
    for u in Unit::ALL {
        let b = bounds.get(u);
        if !(b.lower >= 0.0 && b.lower <= b.upper) || b.lower.is_infinite() {
            return Err(IhsError::InvalidBounds {
                unit: u.as_str(),
                lower: b.lower,
                upper: b.upper,
            });
        }
    }
    if grid.len() < 2 {
        return Err(IhsError::GridTooShort(grid.len()));
    }

    let mut b = TemplateBuilder::default();
    let inf = f64::INFINITY;
    let capacity = Unit::ALL.map(|u| {
        let bd = bounds.get(u);
        b.var(format!("C_{}", u.as_str()), bd.lower, bd.upper, Slot::Design)
    });
    let [c_elec, c_stor, c_heat, c_comp, c_fc] = capacity;

    let mut hours = Vec::with_capacity(grid.len());
    for t in grid.hours() {
        let d_elec_ac = b.per_market("d_elec_ac", t, 0.0, inf);
        let d_elec_dc = b.hourly("d_elec_dc", t, 0.0, inf);
        let f_elec = b.hourly("F_elec", t, 0.0, inf);
        let f_stor_in = b.hourly("F_stor_in", t, 0.0, inf);
        let f_heat_elec = b.hourly("F_heat_elec", t, 0.0, inf);
        let f_stor_out = b.hourly("F_stor_out", t, 0.0, inf);
        let f_fc = b.hourly("F_fc", t, 0.0, inf);
        let f_heat_stor = b.hourly("F_heat_stor", t, 0.0, inf);
        let inventory = b.hourly("I_stor", t, 0.0, inf);
        let d_fc_dc = b.hourly("d_fc_dc", t, -inf, 0.0);
        let d_heat = b.per_market("d_heat", t, 0.0, inf);
        let d_comp = b.per_market("d_comp", t, 0.0, inf);
        let d_fc_ac = b.per_market("d_fc_ac", t, -inf, 0.0);
        hours.push(IhsHour {
            hour: t,
            d_elec_ac,
            d_elec_dc,
            f_elec,
            f_stor_in,
            f_heat_elec,
            f_stor_out,
            f_fc,
            f_heat_stor,
            inventory,
            d_heat,
            d_comp,
            d_fc_dc,
            d_fc_ac,
        });
    }
    let TemplateBuilder { model: mut m, slots } = b;

    let sum2 = |v: [VarId; 2]| LinearExpr::from(v[0]) + v[1];
    let p = params;
    for (k, h) in hours.iter().enumerate() {
        let t = h.hour;
        m.add_constraint(
            format!("rectifier[{t}]"),
            sum2(h.d_elec_ac) - p.rectifier_factor() * h.d_elec_dc,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(
            format!("production[{t}]"),
            h.f_elec - p.production_factor() * h.d_elec_dc,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(
            format!("elec_split[{t}]"),
            h.f_elec - h.f_stor_in - h.f_heat_elec,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(format!("elec_cap[{t}]"), h.d_elec_dc - c_elec, Relation::Le, 0.0);
        if k > 0 {
            let prev = hours[k - 1].d_elec_dc;
            let step = LinearExpr::from(h.d_elec_dc) - prev;
            m.add_constraint(
                format!("ramp_up[{t}]"),
                step.clone() - p.ramp_fraction * c_elec,
                Relation::Le,
                0.0,
            );
            m.add_constraint(
                format!("ramp_down[{t}]"),
                -step - p.ramp_fraction * c_elec,
                Relation::Le,
                0.0,
            );
        }
        let balance = LinearExpr::from(h.inventory) - h.f_stor_in + h.f_stor_out;
        if k > 0 {
            m.add_constraint(
                format!("inventory[{t}]"),
                balance - hours[k - 1].inventory,
                Relation::Eq,
                0.0,
            );
        } else {
            m.add_constraint(format!("inventory[{t}]"), balance, Relation::Eq, p.initial_inventory);
        }
        m.add_constraint(
            format!("stor_split[{t}]"),
            h.f_stor_out - h.f_fc - h.f_heat_stor,
            Relation::Eq,
            0.0,
        );
        // Pressure stays below the upper bound: p_ub * I <= (p_ub - p_lb) * C.
        m.add_constraint(
            format!("pressure[{t}]"),
            p.p_stor_ub * h.inventory - (p.p_stor_ub - p.p_stor_lb) * c_stor,
            Relation::Le,
            0.0,
        );
        let feed = LinearExpr::from(h.f_heat_elec) + h.f_heat_stor;
        m.add_constraint(
            format!("heater[{t}]"),
            sum2(h.d_heat) - feed.clone() * p.heater_factor(),
            Relation::Eq,
            0.0,
        );
        m.add_constraint(format!("dri_demand[{t}]"), feed, Relation::Ge, p.dri_demand);
        m.add_constraint(format!("heat_cap[{t}]"), sum2(h.d_heat) - c_heat, Relation::Le, 0.0);
        m.add_constraint(
            format!("compressor[{t}]"),
            sum2(h.d_comp) - p.compressor_factor() * h.f_stor_in,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(format!("comp_cap[{t}]"), sum2(h.d_comp) - c_comp, Relation::Le, 0.0);
        m.add_constraint(
            format!("fuel_cell[{t}]"),
            LinearExpr::from(h.d_fc_dc) + p.fuel_cell_factor() * h.f_fc,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(
            format!("inverter[{t}]"),
            sum2(h.d_fc_ac) - p.inverter_factor() * h.d_fc_dc,
            Relation::Eq,
            0.0,
        );
        m.add_constraint(format!("fc_cap[{t}]"), -LinearExpr::from(h.d_fc_dc) - c_fc, Relation::Le, 0.0);
    }
    if p.cyclic_inventory {
        let last = hours.last().expect("grid has hours").inventory;
        m.add_constraint("cyclic_inventory", last, Relation::Ge, p.initial_inventory);
    }

    let fraction = costs.fraction_for(grid);
    let fixed_cost = LinearExpr::from_terms(
        capacity
            .iter()
            .zip(costs.annual_rates())
            .map(|(&c, r)| (c, fraction * r)),
    );
    let mut cashflows = Vec::with_capacity(2 * hours.len());
    for h in &hours {
        for mk in Market::ALL {
            let i = mk.index();
            let energy = LinearExpr::from(h.d_elec_ac[i]) + h.d_heat[i] + h.d_comp[i] + h.d_fc_ac[i];
            cashflows.push(Cashflow {
                hour: h.hour,
                market: mk,
                energy,
            });
        }
    }
    m.set_objective(fixed_cost.clone(), Sense::Minimize);

    Ok(IhsModel {
        template: ModelTemplate {
            model: m,
            slots,
            cashflows,
            fixed_cost,
            stage_rule: StageRule::TimeSplit,
            grid: *grid,
        },
        layout: IhsLayout { capacity, hours },
        params: params.clone(),
        costs: costs.clone(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IhsViolation {
    pub scenario: usize,
    pub hour: Option<usize>,
    pub check: String,
    /// Residual divided by `1 + ` the magnitude of the terms involved.
    pub relative: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IhsAudit {
    pub max_violation: f64,
    /// Every check whose relative residual exceeds the audit tolerance.
    pub violations: Vec<IhsViolation>,
    /// `(scenario, hour)` pairs where the furnace feed sits on its minimum.
    pub dri_active: Vec<(usize, usize)>,
    /// Smallest furnace feed margin over all scenarios and hours.
    pub min_dri_margin: f64,
    /// Storage pressure per scenario and hour, MPa.
    pub pressure: Vec<Vec<f64>>,
    pub max_pressure: f64,
    pub min_pressure: f64,
}

impl IhsAudit {
    pub fn hours_flagged(&self) -> Vec<usize> {
        let mut h: Vec<usize> = self.violations.iter().filter_map(|v| v.hour).collect();
        h.sort_unstable();
        h.dedup();
        h
    }
}

/// Recomputes every balance from raw values with constants derived here
/// from first principles, independently of the template builder.
pub fn ihs_mass_energy_audit(model: &IhsModel, sol: &StagedSolution, tol: f64) -> IhsAudit {
    let p = &model.params;
    // Conversions, step by step.
    let mol_per_s = |kg_per_h: f64| kg_per_h / 3600.0 / p.m_h2;
    let heater_mw = |kg_per_h: f64| kg_per_h / 3600.0 * p.e_p / p.eta_heat;
    let comp_mw = |kg_per_h: f64| {
        let centroid = 0.5 * (p.p_stor_lb + p.p_stor_ub);
        let watts = mol_per_s(kg_per_h) * p.r_gas * p.t_elec / p.eta_comp * (centroid / p.p_elec).ln();
        watts * 1e-6
    };
    let fc_mw = |kg_per_h: f64| {
        let amps = 2.0 * p.faraday * mol_per_s(kg_per_h);
        amps * p.v_cell * p.l_deg_fc * 1e-6
    };
    let rho = p.p_stor_ub * 1e6 * p.m_h2 / (p.z * p.r_gas * p.t_stor);

    let mut out = IhsAudit {
        max_violation: 0.0,
        violations: Vec::new(),
        dri_active: Vec::new(),
        min_dri_margin: f64::INFINITY,
        pressure: Vec::new(),
        max_pressure: f64::NEG_INFINITY,
        min_pressure: f64::INFINITY,
    };
    let record = |out: &mut IhsAudit, s: usize, hour: Option<usize>, check: &str, lhs: f64, rhs: f64, kind: Relation| {
        let gap = match kind {
            Relation::Eq => (lhs - rhs).abs(),
            Relation::Le => (lhs - rhs).max(0.0),
            Relation::Ge => (rhs - lhs).max(0.0),
        };
        let rel = gap / (1.0 + lhs.abs().max(rhs.abs()));
        out.max_violation = out.max_violation.max(rel);
        if rel > tol {
            out.violations.push(IhsViolation {
                scenario: s,
                hour,
                check: check.to_string(),
                relative: rel,
            });
        }
    };

    let lay = &model.layout;
    for (s, x) in sol.values.iter().enumerate() {
        let v = |id: VarId| x[id.0];
        let cap = lay.capacity.map(v);
        let [c_elec, c_stor, c_heat, c_comp, c_fc] = cap;
        for (u, c) in Unit::ALL.iter().zip(cap) {
            let b = model.template.model.var(lay.capacity[*u as usize]);
            record(&mut out, s, None, &format!("C_{}_lower", u.as_str()), c, b.lower, Relation::Ge);
            record(&mut out, s, None, &format!("C_{}_upper", u.as_str()), c, b.upper, Relation::Le);
        }
        let mut pressures = Vec::with_capacity(lay.hours.len());
        let mut prev_inv = p.initial_inventory;
        let mut prev_dc: Option<f64> = None;
        for h in &lay.hours {
            let t = Some(h.hour);
            let ac = v(h.d_elec_ac[0]) + v(h.d_elec_ac[1]);
            let dc = v(h.d_elec_dc);
            record(&mut out, s, t, "rectifier", ac, dc * (p.l_ac_dc + p.l_aux_elec), Relation::Eq);
            record(&mut out, s, t, "production", v(h.f_elec), dc * p.l_deg_elec / p.l_elec, Relation::Eq);
            record(
                &mut out,
                s,
                t,
                "elec_split",
                v(h.f_elec),
                v(h.f_stor_in) + v(h.f_heat_elec),
                Relation::Eq,
            );
            record(&mut out, s, t, "elec_cap", dc, c_elec, Relation::Le);
            if let Some(pd) = prev_dc {
                record(&mut out, s, t, "ramp", (dc - pd).abs(), p.ramp_fraction * c_elec, Relation::Le);
            }
            prev_dc = Some(dc);
            let inv = v(h.inventory);
            record(
                &mut out,
                s,
                t,
                "inventory",
                inv,
                prev_inv + v(h.f_stor_in) - v(h.f_stor_out),
                Relation::Eq,
            );
            prev_inv = inv;
            record(
                &mut out,
                s,
                t,
                "stor_split",
                v(h.f_stor_out),
                v(h.f_fc) + v(h.f_heat_stor),
                Relation::Eq,
            );
            let pressure = if c_stor > 0.0 {
                p.p_stor_lb + p.z * inv * rho * p.r_gas * p.t_stor / (p.m_h2 * c_stor) * 1e-6
            } else {
                p.p_stor_lb
            };
            record(&mut out, s, t, "pressure_ub", pressure, p.p_stor_ub, Relation::Le);
            record(&mut out, s, t, "pressure_lb", pressure, p.p_stor_lb, Relation::Ge);
            if c_stor <= 0.0 {
                record(&mut out, s, t, "empty_vessel", inv, 0.0, Relation::Le);
            }
            out.max_pressure = out.max_pressure.max(pressure);
            out.min_pressure = out.min_pressure.min(pressure);
            pressures.push(pressure);
            let feed = v(h.f_heat_elec) + v(h.f_heat_stor);
            let heat = v(h.d_heat[0]) + v(h.d_heat[1]);
            record(&mut out, s, t, "heater", heat, heater_mw(feed), Relation::Eq);
            record(&mut out, s, t, "dri_demand", feed, p.dri_demand, Relation::Ge);
            let margin = feed - p.dri_demand;
            out.min_dri_margin = out.min_dri_margin.min(margin);
            if margin.abs() <= 1e-6 * (1.0 + p.dri_demand) {
                out.dri_active.push((s, h.hour));
            }
            record(&mut out, s, t, "heat_cap", heat, c_heat, Relation::Le);
            let comp = v(h.d_comp[0]) + v(h.d_comp[1]);
            record(&mut out, s, t, "compressor", comp, comp_mw(v(h.f_stor_in)), Relation::Eq);
            record(&mut out, s, t, "comp_cap", comp, c_comp, Relation::Le);
            let fc_dc = v(h.d_fc_dc);
            record(&mut out, s, t, "fuel_cell", -fc_dc, fc_mw(v(h.f_fc)), Relation::Eq);
            let fc_ac = v(h.d_fc_ac[0]) + v(h.d_fc_ac[1]);
            record(&mut out, s, t, "inverter", fc_ac, (p.l_dc_ac - p.l_aux_fc) * fc_dc, Relation::Eq);
            record(&mut out, s, t, "fc_cap", -fc_dc, c_fc, Relation::Le);
            for (name, id) in [
                ("d_elec_dc", h.d_elec_dc),
                ("F_elec", h.f_elec),
                ("F_stor_in", h.f_stor_in),
                ("F_heat_elec", h.f_heat_elec),
                ("F_stor_out", h.f_stor_out),
                ("F_fc", h.f_fc),
                ("F_heat_stor", h.f_heat_stor),
                ("I_stor", h.inventory),
            ] {
                record(&mut out, s, t, name, v(id), 0.0, Relation::Ge);
            }
            for i in 0..2 {
                record(&mut out, s, t, "d_elec_ac", v(h.d_elec_ac[i]), 0.0, Relation::Ge);
                record(&mut out, s, t, "d_heat", v(h.d_heat[i]), 0.0, Relation::Ge);
                record(&mut out, s, t, "d_comp", v(h.d_comp[i]), 0.0, Relation::Ge);
                record(&mut out, s, t, "d_fc_ac", v(h.d_fc_ac[i]), 0.0, Relation::Le);
            }
        }
        if p.cyclic_inventory {
            record(&mut out, s, None, "cyclic_inventory", prev_inv, p.initial_inventory, Relation::Ge);
        }
        out.pressure.push(pressures);
    }
    out
}
