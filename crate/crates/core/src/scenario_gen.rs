//! Gaussian price scenarios around a nominal trajectory.
//!
//! Sampling uses ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) and
//! draws one standard normal per (scenario, hour, market) in that nesting
//! order, markets in DA, ID order; a market that is not perturbed consumes
//! no draw. Other implementations can reproduce a run either by matching
//! that stream or, more simply, by reading the CSV dump.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::market_data::{Currency, Market, PriceMap, PriceSeries};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario count must be at least 1")]
    InvalidCount,
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("need at least two scenarios for a variance")]
    InsufficientScenarios,
    #[error("bad probabilities: {0}")]
    BadProbabilities(String),
    #[error("nominal series are misaligned: {0}")]
    Misaligned(String),
    #[error("dump row {row}: {msg}")]
    BadDump { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `n_s` price trajectories over the same consecutive hours.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    start: usize,
    hours: usize,
    /// `prices[s][h][market.index()]`
    prices: Vec<Vec<[f64; 2]>>,
    probabilities: Vec<f64>,
    pub seed: u64,
    pub sigma_obs: f64,
    pub currency: Currency,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub seed: u64,
    pub sigma_obs: f64,
    pub n_s: usize,
    pub probabilities: Vec<f64>,
    pub start: usize,
    pub hours: usize,
    pub currency: Currency,
}

fn check_probabilities(p: &[f64]) -> Result<(), ScenarioError> {
    if p.is_empty() {
        return Err(ScenarioError::InvalidCount);
    }
    if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(ScenarioError::BadProbabilities(format!("weight {bad} is not positive")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(ScenarioError::BadProbabilities(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Start hour and length shared by every series in `nominal`.
fn nominal_span(nominal: &PriceMap) -> Result<(usize, usize, Currency), ScenarioError> {
    let mut span = None;
    for m in Market::ALL {
        let s = nominal
            .get(&m)
            .ok_or_else(|| ScenarioError::Misaligned(format!("no {m} series")))?;
        match span {
            None => span = Some((s.start, s.len(), s.currency)),
            Some((a, n, _)) if a != s.start || n != s.len() => {
                return Err(ScenarioError::Misaligned(format!(
                    "{m} covers {}..{}, expected {a}..{}",
                    s.start,
                    s.start + s.len(),
                    a + n
                )))
            }
            _ => {}
        }
    }
    Ok(span.expect("two markets"))
}

impl ScenarioSet {
    pub fn from_parts(
        start: usize,
        prices: Vec<Vec<[f64; 2]>>,
        probabilities: Vec<f64>,
    ) -> Result<Self, ScenarioError> {
        check_probabilities(&probabilities)?;
        if prices.len() != probabilities.len() {
            return Err(ScenarioError::BadProbabilities(format!(
                "{} weights for {} scenarios",
                probabilities.len(),
                prices.len()
            )));
        }
        let hours = prices[0].len();
        if prices.iter().any(|s| s.len() != hours) {
            return Err(ScenarioError::Misaligned("scenarios differ in length".into()));
        }
        Ok(Self {
            start,
            hours,
            prices,
            probabilities,
            seed: 0,
            sigma_obs: 0.0,
            currency: Currency::default(),
        })
    }

    /// A single scenario equal to the nominal trajectory.
    pub fn deterministic(nominal: &PriceMap) -> Result<Self, ScenarioError> {
        sample_scenarios(nominal, 0.0, 1, 0)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    pub fn end(&self) -> usize {
        self.start + self.hours
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn price(&self, s: usize, hour: usize, market: Market) -> Option<f64> {
        let h = hour.checked_sub(self.start)?;
        self.prices.get(s)?.get(h).map(|cell| cell[market.index()])
    }

    pub fn series(&self, s: usize, market: Market) -> PriceSeries {
        let values = self.prices[s].iter().map(|c| c[market.index()]).collect();
        PriceSeries::new(market, self.start, values, self.currency)
    }

    pub fn scenario_prices(&self, s: usize) -> PriceMap {
        Market::ALL.iter().map(|&m| (m, self.series(s, m))).collect()
    }

    /// Just scenario `s`, with probability one.
    pub fn single(&self, s: usize) -> ScenarioSet {
        ScenarioSet {
            prices: vec![self.prices[s].clone()],
            probabilities: vec![1.0],
            ..self.clone()
        }
    }

    /// Probability-weighted per-cell mean as a one-scenario set.
    pub fn mean_scenario(&self) -> ScenarioSet {
        let mut mean = vec![[0.0; 2]; self.hours];
        for (s, p) in self.prices.iter().zip(&self.probabilities) {
            for (acc, cell) in mean.iter_mut().zip(s) {
                acc[0] += p * cell[0];
                acc[1] += p * cell[1];
            }
        }
        ScenarioSet {
            prices: vec![mean],
            probabilities: vec![1.0],
            ..self.clone()
        }
    }

    /// SHA-256 over the raw prices and weights; equal sets hash equal.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.start as u64).to_le_bytes());
        h.update((self.hours as u64).to_le_bytes());
        for (s, p) in self.prices.iter().zip(&self.probabilities) {
            h.update(p.to_bits().to_le_bytes());
            for cell in s {
                h.update(cell[0].to_bits().to_le_bytes());
                h.update(cell[1].to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn sidecar(&self) -> DumpSidecar {
        DumpSidecar {
            seed: self.seed,
            sigma_obs: self.sigma_obs,
            n_s: self.len(),
            probabilities: self.probabilities.clone(),
            start: self.start,
            hours: self.hours,
            currency: self.currency,
        }
    }

    /// Writes `scenario,hour,market,price` rows and the JSON sidecar.
    pub fn write_dump<W1: Write, W2: Write>(&self, csv_out: W1, json_out: W2) -> Result<(), ScenarioError> {
        let mut w = csv::Writer::from_writer(csv_out);
        w.write_record(["scenario", "hour", "market", "price"])?;
        for (s, traj) in self.prices.iter().enumerate() {
            for (h, cell) in traj.iter().enumerate() {
                for m in Market::ALL {
                    w.write_record([
                        s.to_string(),
                        (self.start + h).to_string(),
                        m.to_string(),
                        cell[m.index()].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        let mut json_out = json_out;
        serde_json::to_writer_pretty(&mut json_out, &self.sidecar())?;
        json_out.write_all(b"\n")?;
        Ok(())
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
    pub fn save_dump(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), ScenarioError> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_dump(
            std::fs::File::create(&csv_path)?,
            std::fs::File::create(&json_path)?,
        )?;
        Ok((csv_path, json_path))
    }

    pub fn read_dump<R1: Read, R2: Read>(csv_in: R1, json_in: R2) -> Result<Self, ScenarioError> {
        let meta: DumpSidecar = serde_json::from_reader(json_in)?;
        let mut slots = vec![vec![[None::<f64>; 2]; meta.hours]; meta.n_s];
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_in);
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let bad = |msg: String| ScenarioError::BadDump { row, msg };
            if rec.len() != 4 {
                return Err(bad("expected 4 fields".into()));
            }
            let s: usize = rec[0].parse().map_err(|_| bad(format!("bad scenario {:?}", &rec[0])))?;
            let hour: usize = rec[1].parse().map_err(|_| bad(format!("bad hour {:?}", &rec[1])))?;
            let m: Market = rec[2].parse().map_err(|v| bad(format!("unknown market {v:?}")))?;
            let p: f64 = rec[3]
                .parse()
                .ok()
                .filter(|p: &f64| p.is_finite())
                .ok_or_else(|| bad(format!("bad price {:?}", &rec[3])))?;
            let h = hour
                .checked_sub(meta.start)
                .filter(|&h| h < meta.hours)
                .ok_or_else(|| bad(format!("hour {hour} outside the sidecar span")))?;
            let slot = slots
                .get_mut(s)
                .ok_or_else(|| bad(format!("scenario {s} beyond n_s")))?
                .get_mut(h)
                .expect("checked");
            if slot[m.index()].replace(p).is_some() {
                return Err(bad("duplicate cell".into()));
            }
        }
        let prices = slots
            .into_iter()
            .enumerate()
            .map(|(s, traj)| {
                traj.into_iter()
                    .enumerate()
                    .map(|(h, c)| match c {
                        [Some(a), Some(b)] => Ok([a, b]),
                        _ => Err(ScenarioError::BadDump {
                            row: 0,
                            msg: format!("scenario {s} hour {} incomplete", meta.start + h),
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut set = ScenarioSet::from_parts(meta.start, prices, meta.probabilities)?;
        set.seed = meta.seed;
        set.sigma_obs = meta.sigma_obs;
        set.currency = meta.currency;
        Ok(set)
    }

    pub fn load_dump(csv_path: &Path, json_path: &Path) -> Result<Self, ScenarioError> {
        Self::read_dump(std::fs::File::open(csv_path)?, std::fs::File::open(json_path)?)
    }
}

/// Perturbs both markets with i.i.d. `N(0, sigma^2)` noise.
pub fn sample_scenarios(
    nominal: &PriceMap,
    sigma_obs: f64,
    n_s: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    sample_markets(nominal, sigma_obs, n_s, seed, &Market::ALL)
}

/// Like [`sample_scenarios`] but only the listed markets are perturbed; the
/// others keep their nominal price in every scenario.
pub fn sample_markets(
    nominal: &PriceMap,
    sigma_obs: f64,
    n_s: usize,
    seed: u64,
    markets: &[Market],
) -> Result<ScenarioSet, ScenarioError> {
    if n_s == 0 {
        return Err(ScenarioError::InvalidCount);
    }
    if sigma_obs < 0.0 || sigma_obs.is_nan() {
        return Err(ScenarioError::NegativeSigma(sigma_obs));
    }
    let (start, hours, currency) = nominal_span(nominal)?;
    let base: Vec<[f64; 2]> = (0..hours)
        .map(|h| [nominal[&Market::DA].values[h], nominal[&Market::ID].values[h]])
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut prices = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        let mut traj = base.clone();
        for cell in traj.iter_mut() {
            for m in Market::ALL {
                if markets.contains(&m) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    cell[m.index()] += sigma_obs * z;
                }
            }
        }
        prices.push(traj);
    }
    let probabilities = vec![1.0 / n_s as f64; n_s];
    Ok(ScenarioSet {
        start,
        hours,
        prices,
        probabilities,
        seed,
        sigma_obs,
        currency,
    })
}

/// Probability-weighted per-cell mean and unbiased variance, laid out as
/// `[hour][market.index()]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub start: usize,
    pub mean: Vec<[f64; 2]>,
    pub variance: Vec<[f64; 2]>,
}

/// Reliability-weighted unbiased estimator; reduces to the usual `n - 1`
/// form for equal weights.
pub fn empirical_moments(set: &ScenarioSet) -> Result<Moments, ScenarioError> {
    if set.len() < 2 {
        return Err(ScenarioError::InsufficientScenarios);
    }
    let mean = set.mean_scenario().prices.remove(0);
    let w2: f64 = set.probabilities.iter().map(|p| p * p).sum();
    let denom = 1.0 - w2;
    let mut variance = vec![[0.0; 2]; set.hours];
    for (s, p) in set.prices.iter().zip(&set.probabilities) {
        for ((v, cell), mu) in variance.iter_mut().zip(s).zip(&mean) {
            for k in 0..2 {
                v[k] += p * (cell[k] - mu[k]).powi(2);
            }
        }
    }
    for v in &mut variance {
        v[0] /= denom;
        v[1] /= denom;
    }
    Ok(Moments {
        start: set.start,
        mean,
        variance,
    })
}
