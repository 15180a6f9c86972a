//! Command-line front end: config resolution, the five run modes, output
//! files and replayable manifests.
//!
//! Precedence for every setting is flag (or its environment variable) over
//! the JSON config file over the built-in default. Each run writes its
//! artifacts plus `manifest.json` into the output directory; feeding that
//! manifest to `replay` reruns the exact configuration and, with
//! `--check`, verifies every output digest.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use storage_risk_lp::{EmbeddedSolver, Solver, Status};
use thiserror::Error;

use crate::bess::{bess_soc_audit, build_bess_template, BessModel, BessParams};
use crate::evaluation::{
    compute_metrics, fmt_num, frontier_sweep, solve_eev, solve_ws, EvalError, MetricReport, PointStatus,
};
use crate::ihs::{build_ihs_template, ihs_mass_energy_audit, CapacityBounds, IhsCostParams, IhsModel, IhsParams, Unit};
use crate::market_data::{load_prices, split_prices, synthetic_prices, write_prices, PriceMap, SyntheticProfile, TimeGrid};
use crate::rolling::{run_rolling, RealizedRule, RollingConfig, RollingError, RollingRun};
use crate::scenario_gen::{sample_scenarios, ScenarioError, ScenarioSet};
use crate::stochastic::{assemble, extract_solution, ModelTemplate, RiskConfig, RiskScope, StageRule, StochasticError};

/// Above this many scenario-hour-market cells the embedded simplex gets
/// slow enough that the CLI prints a warning.
pub const DESK_SCALE_LIMIT: usize = 100_000;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "STORAGE_RISK_OUT";

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("missing or unreadable data: {0}")]
    DataMissing(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("replay does not match the manifest: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::DataMissing(_) => 3,
            CliError::SolverFailure(_) => 4,
            CliError::Output(_) => 5,
            CliError::ReplayMismatch(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "config_invalid",
            CliError::DataMissing(_) => "data_missing",
            CliError::SolverFailure(_) => "solver_failure",
            CliError::Output(_) => "output",
            CliError::ReplayMismatch(_) => "replay_mismatch",
        }
    }

    /// The machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

impl From<StochasticError> for CliError {
    fn from(e: StochasticError) -> Self {
        match e {
            StochasticError::NotOptimal(_) | StochasticError::Solver(_) | StochasticError::OutOfBounds { .. } => {
                CliError::SolverFailure(e.to_string())
            }
            _ => CliError::ConfigInvalid(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Stochastic(s) => s.into(),
            EvalError::Scenario { scenario, source } => match CliError::from(source) {
                CliError::SolverFailure(m) => CliError::SolverFailure(format!("scenario {scenario}: {m}")),
                other => other,
            },
            EvalError::Io(e) => CliError::Output(e.to_string()),
            EvalError::Csv(e) => CliError::Output(e.to_string()),
            other => CliError::ConfigInvalid(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Csv(_) | ScenarioError::Json(_) | ScenarioError::Io(_) => CliError::Output(e.to_string()),
            _ => CliError::ConfigInvalid(e.to_string()),
        }
    }
}

impl From<RollingError> for CliError {
    fn from(e: RollingError) -> Self {
        match e {
            RollingError::InvalidConfig(_) | RollingError::Bess(_) | RollingError::EmptySet => {
                CliError::ConfigInvalid(e.to_string())
            }
            RollingError::Data(_) => CliError::DataMissing(e.to_string()),
            RollingError::Csv(_) | RollingError::Io(_) => CliError::Output(e.to_string()),
            _ => CliError::SolverFailure(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Ihs,
    Bess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scenarios,
    Solve,
    Frontier,
    Metrics,
    Rolling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    SecondStage,
    Total,
}

impl From<ScopeArg> for RiskScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::SecondStage => RiskScope::SecondStage,
            ScopeArg::Total => RiskScope::Total,
        }
    }
}

/// Everything a run depends on. Serialized verbatim into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: Case,
    pub mode: Mode,
    pub t0: usize,
    /// First recourse hour; `None` picks `t0` for ihs and `t0 + 48` for bess
    /// (half the horizon when that is shorter than four days).
    pub t_obs: Option<usize>,
    pub t_f: usize,
    pub alpha: f64,
    /// CVaR bounds, descending. `"inf"` drops the constraint. Rolling
    /// bounds are annualized.
    #[serde(with = "eps_list")]
    pub epsilon: Vec<f64>,
    pub n_s: usize,
    pub sigma_obs: f64,
    pub seed: u64,
    /// Seed of the synthetic nominal prices used when `prices` is unset.
    pub price_seed: u64,
    /// CSV of `hour,market,price` rows.
    pub prices: Option<PathBuf>,
    /// JSON parameters of the chosen case.
    pub params: Option<PathBuf>,
    /// JSON cost parameters (ihs only).
    pub costs: Option<PathBuf>,
    /// JSON capacity bounds (ihs only).
    pub bounds: Option<PathBuf>,
    /// `None` picks second_stage for ihs and total for bess.
    pub scope: Option<RiskScope>,
    /// Rolling window length in hours.
    pub window: usize,
    pub rule: RealizedRule,
    /// Per-window EVPI/VSS in rolling mode.
    pub window_metrics: bool,
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: Case::Bess,
            mode: Mode::Solve,
            t0: 0,
            t_obs: None,
            t_f: 167,
            alpha: 0.95,
            epsilon: vec![f64::INFINITY],
            n_s: 35,
            sigma_obs: 20.0,
            seed: 0,
            price_seed: 1,
            prices: None,
            params: None,
            costs: None,
            bounds: None,
            scope: None,
            window: 24,
            rule: RealizedRule::SeededUniform,
            window_metrics: false,
            out_dir: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

mod eps_list {
    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_finite() {
                seq.serialize_element(x)?;
            } else {
                seq.serialize_element(&super::fmt_num(*x))?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Raw>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Raw::Num(x) => Ok(x),
                Raw::Text(t) => super::parse_eps(&t).map_err(D::Error::custom),
            })
            .collect()
    }
}

/// Parses one bound: a number, or `inf`/`infinity` for no bound.
pub fn parse_eps(s: &str) -> Result<f64, String> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("{t:?} is not a number or `inf`")),
    }
}

fn parse_rule(s: &str) -> Result<RealizedRule, String> {
    match s {
        "seeded_uniform" => Ok(RealizedRule::SeededUniform),
        "nearest_to_fresh_draw" => Ok(RealizedRule::NearestToFreshDraw),
        _ => s
            .strip_prefix("index:")
            .and_then(|i| i.parse().ok())
            .map(RealizedRule::Index)
            .ok_or_else(|| format!("{s:?}: expected seeded_uniform, nearest_to_fresh_draw or index:N")),
    }
}

/// Flags shared by every run mode. Unset flags leave the config alone.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub case: Option<Case>,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub t_obs: Option<usize>,
    #[arg(long)]
    pub t_f: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated CVaR bounds, e.g. `inf,5.8e6,5.7e6`.
    #[arg(long, value_delimiter = ',', value_parser = parse_eps, allow_hyphen_values = true)]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub ns: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub price_seed: Option<u64>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub costs: Option<PathBuf>,
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    #[arg(long)]
    pub window: Option<usize>,
    /// seeded_uniform, nearest_to_fresh_draw or index:N
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<RealizedRule>,
    #[arg(long)]
    pub window_metrics: bool,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Parser, Debug)]
#[command(name = "storage-risk", version, about = "Risk-constrained stochastic scheduling for storage assets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a scenario set and dump it with its sidecar.
    Scenarios(RunArgs),
    /// One stochastic solve with its metrics and audit.
    Solve(RunArgs),
    /// Risk-reward frontier over the epsilon ladder.
    Frontier(RunArgs),
    /// EVPI, VSS and the risk-adjusted VSS for each epsilon.
    Metrics(RunArgs),
    /// Rolling-horizon battery run for each epsilon.
    Rolling(RunArgs),
    /// Rerun a manifest.
    Replay {
        manifest: PathBuf,
        /// Write here instead of the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail unless every output digest matches the manifest.
        #[arg(long)]
        check: bool,
    },
}

impl RunConfig {
    /// Default, then the config file, then the flags.
    pub fn resolve(mode: Mode, args: &RunArgs) -> Result<Self, CliError> {
        let mut c = match &args.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::DataMissing(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        c.mode = mode;
        macro_rules! take {
            ($($f:ident => $g:ident),* $(,)?) => {$(
                if let Some(v) = args.$f.clone() {
                    c.$g = v.into();
                }
            )*};
        }
        take!(case => case, t0 => t0, t_f => t_f, alpha => alpha, eps => epsilon, ns => n_s,
            sigma => sigma_obs, seed => seed, price_seed => price_seed, window => window,
            rule => rule, out => out_dir, jobs => jobs);
        if args.t_obs.is_some() {
            c.t_obs = args.t_obs;
        }
        for (flag, slot) in [
            (&args.prices, &mut c.prices),
            (&args.params, &mut c.params),
            (&args.costs, &mut c.costs),
            (&args.bounds, &mut c.bounds),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(s) = args.scope {
            c.scope = Some(s.into());
        }
        c.window_metrics |= args.window_metrics;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::ConfigInvalid(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.n_s == 0 {
            return bad("n_s must be at least 1".into());
        }
        if !(self.sigma_obs >= 0.0 && self.sigma_obs.is_finite()) {
            return bad(format!("sigma_obs {}", self.sigma_obs));
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.epsilon.is_empty() {
            return bad("epsilon ladder is empty".into());
        }
        if self.epsilon.iter().any(|e| e.is_nan() || *e == f64::NEG_INFINITY) {
            return bad("epsilon must be a number or inf".into());
        }
        if self.epsilon.windows(2).any(|w| w[0] < w[1]) {
            return bad("epsilon ladder must be sorted descending".into());
        }
        if self.mode == Mode::Solve && self.epsilon.len() != 1 {
            return bad(format!("solve takes one epsilon, got {}", self.epsilon.len()));
        }
        self.grid()?;
        if self.mode == Mode::Rolling {
            if self.case != Case::Bess {
                return bad("rolling runs need --case bess".into());
            }
            let period = self.t_f + 1 - self.t0;
            if self.window == 0 || !period.is_multiple_of(self.window) {
                return bad(format!("window {} must divide the {period}-hour horizon", self.window));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let t_obs = self.t_obs.unwrap_or(match self.case {
            Case::Ihs => self.t0,
            Case::Bess => self.t0 + 48.min((self.t_f + 1).saturating_sub(self.t0) / 2),
        });
        TimeGrid::new(self.t0, t_obs, self.t_f).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn scope(&self) -> RiskScope {
        self.scope.unwrap_or(match self.case {
            Case::Ihs => RiskScope::SecondStage,
            Case::Bess => RiskScope::Total,
        })
    }

    /// Scenario-hour-market cells of one stochastic program.
    pub fn problem_cells(&self) -> usize {
        let hours = match self.mode {
            Mode::Rolling => self.window,
            _ => self.t_f + 1 - self.t0,
        };
        hours * self.n_s * 2
    }

    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub solver_version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    /// Files read, with paths as given in the config.
    pub inputs: Vec<FileDigest>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::DataMissing(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Collects output files as they are written.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<fs::File, CliError> {
        let p = self.path(name);
        fs::File::create(&p).map_err(|e| out_err(&p, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value).map_err(|e| out_err(Path::new(name), e))?;
        writeln!(f).map_err(|e| out_err(Path::new(name), e))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let f = self.create(name)?;
        let mut w = csv::Writer::from_writer(f);
        let wrap = |e: csv::Error| out_err(Path::new(name), e);
        w.write_record(header).map_err(wrap)?;
        for r in rows {
            w.write_record(r).map_err(wrap)?;
        }
        w.flush().map_err(|e| out_err(Path::new(name), e))
    }
}

enum Built {
    Ihs(IhsModel),
    Bess(BessModel),
}

impl Built {
    fn template(&self) -> &ModelTemplate {
        match self {
            Built::Ihs(m) => &m.template,
            Built::Bess(m) => &m.template,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, CliError> {
    let Some(p) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(p).map_err(|e| CliError::DataMissing(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))
}

/// Inputs shared by the modes: nominal prices and their stage split.
struct Prepared {
    grid: TimeGrid,
    prices: PriceMap,
    first: PriceMap,
    observed: PriceMap,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let grid = cfg.grid()?;
    let prices = match &cfg.prices {
        Some(p) => load_prices(p, &grid).map_err(|e| CliError::DataMissing(format!("{}: {e}", p.display())))?,
        None => synthetic_prices(&grid, &SyntheticProfile::default(), cfg.price_seed),
    };
    let (first, observed) = split_prices(&prices, &grid).map_err(|e| CliError::DataMissing(e.to_string()))?;
    Ok(Prepared {
        grid,
        prices,
        first,
        observed,
    })
}

fn build(cfg: &RunConfig, grid: &TimeGrid) -> Result<Built, CliError> {
    let invalid = |e: &dyn std::fmt::Display| CliError::ConfigInvalid(e.to_string());
    match cfg.case {
        Case::Ihs => {
            let params: IhsParams = read_json(&cfg.params)?;
            let costs: IhsCostParams = read_json(&cfg.costs)?;
            let bounds: CapacityBounds = read_json(&cfg.bounds)?;
            build_ihs_template(&params, &costs, grid, &bounds)
                .map(Built::Ihs)
                .map_err(|e| invalid(&e))
        }
        Case::Bess => {
            let params: BessParams = read_json(&cfg.params)?;
            build_bess_template(&params, grid, StageRule::TimeSplit)
                .map(Built::Bess)
                .map_err(|e| invalid(&e))
        }
    }
}

fn scenario_set(cfg: &RunConfig, p: &Prepared) -> Result<ScenarioSet, CliError> {
    if p.grid.num_observed() == 0 {
        return Err(CliError::ConfigInvalid("no recourse hours: t_obs lies past t_f".into()));
    }
    Ok(sample_scenarios(&p.observed, cfg.sigma_obs, cfg.n_s, cfg.seed)?)
}

fn num(x: f64) -> String {
    fmt_num(x)
}

fn metrics_row(r: &MetricReport) -> Vec<String> {
    [
        r.epsilon,
        r.expected_cost,
        r.cvar,
        r.expected_cost_inf,
        r.cvar_inf,
        r.ws,
        r.eev,
        r.evpi,
        r.vss,
        r.vss_cvar,
        r.market_cost_ratio,
    ]
    .into_iter()
    .map(num)
    .collect()
}

const METRICS_HEADER: [&str; 12] = [
    "epsilon",
    "expected_cost",
    "cvar",
    "expected_cost_inf",
    "cvar_inf",
    "ws",
    "eev",
    "evpi",
    "vss",
    "vss_cvar",
    "market_cost_ratio",
    "status",
];

fn run_scenarios(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let set = scenario_set(cfg, &p)?;
    let f = out.create("prices.csv")?;
    write_prices(&p.prices, f).map_err(|e| CliError::Output(e.to_string()))?;
    let csv = out.create("scenarios.csv")?;
    let json = out.create("scenarios.json")?;
    set.write_dump(csv, json)?;
    Ok(())
}

/// Design or audit details of one solution, per case.
fn case_details(built: &Built, sol: &crate::stochastic::StagedSolution) -> serde_json::Value {
    match built {
        Built::Ihs(m) => {
            let caps = m.capacities(sol);
            let audit = ihs_mass_energy_audit(m, sol, 1e-6);
            let names: serde_json::Map<String, serde_json::Value> =
                Unit::ALL.iter().zip(caps).map(|(u, c)| (u.as_str().to_string(), c.into())).collect();
            serde_json::json!({
                "capacities": names,
                "capital_cost": m.capital_cost(&caps),
                "audit_max_violation": audit.max_violation,
                "audit_violations": audit.violations.len(),
                "min_dri_margin": audit.min_dri_margin,
                "pressure_range": [audit.min_pressure, audit.max_pressure],
            })
        }
        Built::Bess(m) => {
            let audit = bess_soc_audit(m, sol, 1e-6);
            serde_json::json!({
                "audit_max_violation": audit.max_violation(),
                "exclusivity_violations": audit.exclusivity.len(),
                "max_cycle_excess": audit.max_cycle_excess,
            })
        }
    }
}

fn run_solve(cfg: &RunConfig, solver: &dyn Solver, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let set = scenario_set(cfg, &p)?;
    let built = build(cfg, &p.grid)?;
    let t = built.template();
    let risk = RiskConfig::neutral(cfg.alpha, cfg.scope()).with_epsilon(cfg.epsilon[0]);
    let neutral = RiskConfig::neutral(cfg.alpha, cfg.scope());
    let sp_inf = assemble(t, &p.first, &set, &neutral)?.solve_staged(solver)?;
    let sp_eps = if risk.epsilon.is_finite() {
        assemble(t, &p.first, &set, &risk)?.solve_staged(solver)?
    } else {
        sp_inf.clone()
    };
    let ws = solve_ws(t, &p.first, &set, &risk, solver, cfg.jobs)?;
    let eev = solve_eev(t, &p.first, &set, &risk, solver)?;
    let report = compute_metrics(&sp_eps, &sp_inf, &ws, &eev)?;
    out.json(
        "solve.json",
        &serde_json::json!({
            "case": cfg.case,
            "metrics": report,
            "details": case_details(&built, &sp_eps),
            "solution": sp_eps.to_json(),
        }),
    )?;
    let mut row = metrics_row(&report);
    row.push("optimal".into());
    out.csv("metrics.csv", &METRICS_HEADER, &[row])
}

fn run_frontier(cfg: &RunConfig, solver: &dyn Solver, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let set = scenario_set(cfg, &p)?;
    let built = build(cfg, &p.grid)?;
    let base = RiskConfig::neutral(cfg.alpha, cfg.scope());
    let points = frontier_sweep(built.template(), &p.first, &set, &base, &cfg.epsilon, solver, cfg.jobs)?;
    let mut header = vec!["epsilon", "status", "expected_cost", "cvar"];
    if let Built::Ihs(_) = built {
        header.extend(["c_elec", "c_stor", "c_heat", "c_comp", "c_fc", "j_cap"]);
    }
    let mut rows = Vec::new();
    for pt in &points {
        let status = match pt.status {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible => "infeasible",
        };
        let mut r = vec![num(pt.epsilon), status.into(), num(pt.expected_cost), num(pt.cvar)];
        if let Built::Ihs(m) = &built {
            let caps = pt.solution.as_ref().map_or([f64::NAN; 5], |s| m.capacities(s));
            let cap = if caps[0].is_nan() { f64::NAN } else { m.capital_cost(&caps) };
            r.extend(caps.iter().chain([&cap]).map(|&x| num(x)));
        }
        rows.push(r);
    }
    out.csv("frontier.csv", &header, &rows)
}

fn run_metrics(cfg: &RunConfig, solver: &dyn Solver, out: &mut Outputs) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let set = scenario_set(cfg, &p)?;
    let built = build(cfg, &p.grid)?;
    let t = built.template();
    let neutral = RiskConfig::neutral(cfg.alpha, cfg.scope());
    let sp_inf = assemble(t, &p.first, &set, &neutral)?.solve_staged(solver)?;
    let ws = solve_ws(t, &p.first, &set, &neutral, solver, cfg.jobs)?;
    let eev = solve_eev(t, &p.first, &set, &neutral, solver)?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &eps in &cfg.epsilon {
        let sp_eps = if eps.is_finite() {
            let program = assemble(t, &p.first, &set, &neutral.with_epsilon(eps))?;
            let raw = program.solve(solver)?;
            match raw.status {
                Status::Optimal => extract_solution(&program, &raw)?,
                Status::Infeasible => {
                    let mut r = vec![num(eps)];
                    r.extend(std::iter::repeat_n(num(f64::NAN), METRICS_HEADER.len() - 2));
                    r.push("infeasible".into());
                    rows.push(r);
                    continue;
                }
                s => return Err(StochasticError::NotOptimal(s).into()),
            }
        } else {
            sp_inf.clone()
        };
        let report = compute_metrics(&sp_eps, &sp_inf, &ws, &eev)?;
        let mut r = metrics_row(&report);
        r.push("optimal".into());
        rows.push(r);
        reports.push(report);
    }
    out.json("metrics.json", &reports)?;
    out.csv("metrics.csv", &METRICS_HEADER, &rows)
}

fn rolling_config(cfg: &RunConfig, epsilon: f64) -> RollingConfig {
    RollingConfig {
        start: cfg.t0,
        window: cfg.window,
        period: cfg.t_f + 1 - cfg.t0,
        n_s: cfg.n_s,
        sigma_obs: cfg.sigma_obs,
        rule: cfg.rule,
        epsilon,
        alpha: cfg.alpha,
        seed: cfg.seed,
        metrics: cfg.window_metrics,
    }
}

fn run_rolling_mode(cfg: &RunConfig, solver: &dyn Solver, out: &mut Outputs) -> Result<(), CliError> {
    let grid = TimeGrid::new(cfg.t0, cfg.t0, cfg.t_f).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    let prices = match &cfg.prices {
        Some(p) => load_prices(p, &grid).map_err(|e| CliError::DataMissing(format!("{}: {e}", p.display())))?,
        None => synthetic_prices(&grid, &SyntheticProfile::default(), cfg.price_seed),
    };
    let params: BessParams = read_json(&cfg.params)?;
    let header = [
        "epsilon",
        "status",
        "window_epsilon",
        "sum_cvar",
        "sum_expected",
        "sum_evpi",
        "sum_vss",
        "sum_vss_cvar",
        "da_cash",
        "id_cash",
        "profit",
        "continuity_error",
    ];
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (k, &eps) in cfg.epsilon.iter().enumerate() {
        let rc = rolling_config(cfg, eps);
        match run_rolling(&rc, &prices, &params, solver, cfg.jobs) {
            Ok(run) => {
                let f = out.create(&format!("rolling_ledger_{k}.csv"))?;
                run.write_ledger_csv(f)?;
                rows.push(summary_row(&run));
                summaries.push(serde_json::json!({
                    "status": "optimal",
                    "summary": run.summary,
                    "continuity_error": run.continuity_error(),
                }));
            }
            Err(RollingError::WindowInfeasible { window }) => {
                let mut r = vec![num(eps), "infeasible".into(), num(rc.window_epsilon())];
                r.extend(std::iter::repeat_n(num(f64::NAN), header.len() - 3));
                rows.push(r);
                summaries.push(serde_json::json!({
                    "status": "infeasible",
                    "epsilon": fmt_num(eps),
                    "infeasible_window": window,
                }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.json("rolling.json", &summaries)?;
    out.csv("rolling_summary.csv", &header, &rows)
}

fn summary_row(run: &RollingRun) -> Vec<String> {
    let s = &run.summary;
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    vec![
        num(s.epsilon),
        "optimal".into(),
        num(s.window_epsilon),
        num(s.sum_cvar),
        num(s.sum_expected),
        opt(s.sum_evpi),
        opt(s.sum_vss),
        opt(s.sum_vss_cvar),
        num(s.da_cash),
        num(s.id_cash),
        num(s.profit),
        num(run.continuity_error()),
    ]
}

/// Runs one resolved configuration and writes its manifest. Returns the
/// manifest.
pub fn run(cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let cells = cfg.problem_cells();
    if cells > DESK_SCALE_LIMIT {
        eprintln!(
            "warning: {cells} scenario-hour-market cells exceed {DESK_SCALE_LIMIT}; the embedded simplex \
             will be slow. Shorten the horizon, lower n_s, or plug in an external solver."
        );
    }
    let mut inputs = Vec::new();
    for p in [&cfg.prices, &cfg.params, &cfg.costs, &cfg.bounds].into_iter().flatten() {
        inputs.push(FileDigest {
            path: p.display().to_string(),
            sha256: digest_file(p)?,
        });
    }
    let solver = EmbeddedSolver::default();
    let mut out = Outputs::new(&cfg.out_dir)?;
    match cfg.mode {
        Mode::Scenarios => run_scenarios(cfg, &mut out)?,
        Mode::Solve => run_solve(cfg, &solver, &mut out)?,
        Mode::Frontier => run_frontier(cfg, &solver, &mut out)?,
        Mode::Metrics => run_metrics(cfg, &solver, &mut out)?,
        Mode::Rolling => run_rolling_mode(cfg, &solver, &mut out)?,
    }
    let outputs = out
        .files
        .iter()
        .map(|f| {
            Ok(FileDigest {
                path: f.clone(),
                sha256: digest_file(&out.dir.join(f))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        solver_version: storage_risk_lp::VERSION.into(),
        mode: cfg.mode,
        seed: cfg.seed,
        config_sha256: cfg.sha256(),
        config: cfg.clone(),
        inputs,
        outputs,
    };
    out.json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::DataMissing(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}

/// Reruns a manifest's configuration, optionally into another directory.
/// With `check`, inputs and outputs must hash as recorded.
pub fn replay(manifest: &Manifest, out: Option<&Path>, check: bool) -> Result<Manifest, CliError> {
    if manifest.config.sha256() != manifest.config_sha256 {
        return Err(CliError::ReplayMismatch("config does not hash to config_sha256".into()));
    }
    if check {
        for input in &manifest.inputs {
            let now = digest_file(Path::new(&input.path))?;
            if now != input.sha256 {
                return Err(CliError::ReplayMismatch(format!("input {} changed", input.path)));
            }
        }
    }
    let mut cfg = manifest.config.clone();
    if let Some(dir) = out {
        cfg.out_dir = dir.to_path_buf();
    }
    let rerun = run(&cfg)?;
    if check && rerun.outputs != manifest.outputs {
        let diff: Vec<&str> = rerun
            .outputs
            .iter()
            .filter(|o| !manifest.outputs.contains(o))
            .map(|o| o.path.as_str())
            .collect();
        return Err(CliError::ReplayMismatch(format!("outputs differ: {}", diff.join(", "))));
    }
    Ok(rerun)
}

fn dispatch(cli: Cli) -> Result<Manifest, CliError> {
    let (mode, args) = match cli.command {
        Command::Scenarios(a) => (Mode::Scenarios, a),
        Command::Solve(a) => (Mode::Solve, a),
        Command::Frontier(a) => (Mode::Frontier, a),
        Command::Metrics(a) => (Mode::Metrics, a),
        Command::Rolling(a) => (Mode::Rolling, a),
        Command::Replay { manifest, out, check } => {
            let m = load_manifest(&manifest)?;
            return replay(&m, out.as_deref(), check);
        }
    };
    run(&RunConfig::resolve(mode, &args)?)
}

/// Parses arguments, runs, and returns the process exit code. Success
/// prints a one-line JSON summary on stdout; failure prints error JSON on
/// stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::ConfigInvalid(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(m) => {
            let files: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
            println!(
                "{}",
                serde_json::json!({
                    "status": "ok",
                    "mode": m.mode,
                    "out_dir": m.config.out_dir,
                    "outputs": files,
                    "config_sha256": m.config_sha256,
                })
            );
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
