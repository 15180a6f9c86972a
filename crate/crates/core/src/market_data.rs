//! Time grids, markets and hourly price series.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Market {
    DA,
    ID,
}

impl Market {
    pub const ALL: [Market; 2] = [Market::DA, Market::ID];

    pub fn index(self) -> usize {
        match self {
            Market::DA => 0,
            Market::ID => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Market::DA => "DA",
            Market::ID => "ID",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Market {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "DA" => Ok(Market::DA),
            "ID" => Ok(Market::ID),
            other => Err(other.to_string()),
        }
    }
}

/// Hourly grid `t0..=t_f`, split at `t_obs` into the hours priced before
/// uncertainty resolves (`t0..t_obs`) and after (`t_obs..=t_f`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: usize,
    pub t_obs: usize,
    pub t_f: usize,
}

impl TimeGrid {
    pub fn new(t0: usize, t_obs: usize, t_f: usize) -> Result<Self, DataError> {
        if !(t0 <= t_obs && t_obs <= t_f + 1) {
            return Err(DataError::InvalidGrid(format!(
                "need t0 <= t_obs <= t_f + 1, got t0={t0} t_obs={t_obs} t_f={t_f}"
            )));
        }
        Ok(Self { t0, t_obs, t_f })
    }

    /// `hours` hours starting at `t0` with the split at `t0 + first_stage_hours`.
    pub fn span(t0: usize, hours: usize, first_stage_hours: usize) -> Result<Self, DataError> {
        if hours == 0 {
            return Err(DataError::InvalidGrid("grid needs at least one hour".into()));
        }
        Self::new(t0, t0 + first_stage_hours, t0 + hours - 1)
    }

    pub fn len(&self) -> usize {
        self.t_f - self.t0 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hours(&self) -> std::ops::RangeInclusive<usize> {
        self.t0..=self.t_f
    }

    pub fn first_stage_hours(&self) -> std::ops::Range<usize> {
        self.t0..self.t_obs
    }

    pub fn observed_hours(&self) -> std::ops::RangeInclusive<usize> {
        self.t_obs..=self.t_f
    }

    pub fn num_first_stage(&self) -> usize {
        self.t_obs - self.t0
    }

    pub fn num_observed(&self) -> usize {
        self.t_f + 1 - self.t_obs
    }

    pub fn with_t_obs(&self, t_obs: usize) -> Result<Self, DataError> {
        Self::new(self.t0, t_obs, self.t_f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Currency {
    #[default]
    USD,
    EUR,
}

/// Prices in currency/MWh for consecutive hours starting at `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub market: Market,
    pub start: usize,
    pub values: Vec<f64>,
    pub currency: Currency,
}

impl PriceSeries {
    pub fn new(market: Market, start: usize, values: Vec<f64>, currency: Currency) -> Self {
        Self {
            market,
            start,
            values,
            currency,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn covers(&self, hour: usize) -> bool {
        hour >= self.start && hour < self.start + self.values.len()
    }

    pub fn at(&self, hour: usize) -> Option<f64> {
        hour.checked_sub(self.start)
            .and_then(|i| self.values.get(i).copied())
    }

    /// Sub-series for `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Option<PriceSeries> {
        let lo = start.checked_sub(self.start)?;
        let values = self.values.get(lo..lo + len)?.to_vec();
        Some(PriceSeries::new(self.market, start, values, self.currency))
    }
}

pub type PriceMap = BTreeMap<Market, PriceSeries>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("no price for hour {hour} in market {market}")]
    MissingHour { hour: usize, market: Market },
    #[error("row {row}: duplicate entry for hour {hour} market {market}")]
    DuplicateEntry { row: usize, hour: usize, market: Market },
    #[error("row {row}: unknown market {value:?}")]
    UnknownMarket { row: usize, value: String },
    #[error("row {row}: price {value:?} is not a finite number")]
    NonFiniteValue { row: usize, value: String },
    #[error("row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error("row {row}: hour {hour} lies outside the grid")]
    OutsideGrid { row: usize, hour: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn load_prices(path: impl AsRef<Path>, grid: &TimeGrid) -> Result<PriceMap, DataError> {
    let file = std::fs::File::open(path)?;
    read_prices(file, grid, Currency::default())
}

/// Reads `hour,market,price` rows. Row numbers in errors count the header
/// as row 1, matching what an editor shows.
pub fn read_prices<R: Read>(reader: R, grid: &TimeGrid, currency: Currency) -> Result<PriceMap, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["hour", "market", "price"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(DataError::BadRow {
            row: 1,
            msg: format!("header must be `hour,market,price`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let n = grid.len();
    let mut slots: [Vec<Option<f64>>; 2] = [vec![None; n], vec![None; n]];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != 3 {
            return Err(DataError::BadRow { row, msg: "expected 3 fields".into() });
        }
        let hour: usize = rec[0].parse().map_err(|_| DataError::BadRow {
            row,
            msg: format!("hour {:?} is not a non-negative integer", &rec[0]),
        })?;
        let market: Market = rec[1]
            .parse()
            .map_err(|value| DataError::UnknownMarket { row, value })?;
        let price: f64 = rec[2]
            .parse()
            .ok()
            .filter(|p: &f64| p.is_finite())
            .ok_or_else(|| DataError::NonFiniteValue { row, value: rec[2].to_string() })?;
        if hour < grid.t0 || hour > grid.t_f {
            return Err(DataError::OutsideGrid { row, hour });
        }
        let slot = &mut slots[market.index()][hour - grid.t0];
        if slot.is_some() {
            return Err(DataError::DuplicateEntry { row, hour, market });
        }
        *slot = Some(price);
    }
    let mut out = PriceMap::new();
    for m in Market::ALL {
        let values = slots[m.index()]
            .iter()
            .enumerate()
            .map(|(k, v)| v.ok_or(DataError::MissingHour { hour: grid.t0 + k, market: m }))
            .collect::<Result<Vec<f64>, _>>()?;
        out.insert(m, PriceSeries::new(m, grid.t0, values, currency));
    }
    Ok(out)
}

/// Canonical CSV: header, then rows sorted by (hour, market), prices in
/// shortest round-trip decimal form.
pub fn write_prices<W: Write>(prices: &PriceMap, writer: W) -> Result<(), DataError> {
    let mut rows: Vec<(usize, Market, f64)> = prices
        .values()
        .flat_map(|s| s.values.iter().enumerate().map(move |(k, &p)| (s.start + k, s.market, p)))
        .collect();
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "market", "price"])?;
    for (h, m, p) in rows {
        w.write_record([h.to_string(), m.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Splits at `grid.t_obs`: hours before it and hours from it on.
pub fn split_horizon(series: &PriceSeries, grid: &TimeGrid) -> Result<(PriceSeries, PriceSeries), DataError> {
    if series.start != grid.t0 || series.len() != grid.len() {
        return Err(DataError::InvalidGrid(format!(
            "series covers {}..{} but grid is {}..={}",
            series.start,
            series.start + series.len(),
            grid.t0,
            grid.t_f
        )));
    }
    let k = grid.num_first_stage();
    let first = PriceSeries::new(series.market, grid.t0, series.values[..k].to_vec(), series.currency);
    let second = PriceSeries::new(series.market, grid.t_obs, series.values[k..].to_vec(), series.currency);
    Ok((first, second))
}

/// [`split_horizon`] applied to every market of a map.
pub fn split_prices(prices: &PriceMap, grid: &TimeGrid) -> Result<(PriceMap, PriceMap), DataError> {
    let mut first = PriceMap::new();
    let mut second = PriceMap::new();
    for (m, series) in prices {
        let (a, b) = split_horizon(series, grid)?;
        first.insert(*m, a);
        second.insert(*m, b);
    }
    Ok((first, second))
}

/// Shape of the synthetic demo price generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub base: f64,
    /// Peak-to-mean amplitude of the daily cycle.
    pub daily_amplitude: f64,
    /// Weekday/weekend swing.
    pub weekly_amplitude: f64,
    /// Hour-to-hour noise on the day-ahead curve.
    pub da_noise: f64,
    /// Standard deviation of the persistent intraday deviation from day-ahead.
    pub id_spread: f64,
    /// AR(1) persistence of that deviation.
    pub id_persistence: f64,
    pub currency: Currency,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            base: 45.0,
            daily_amplitude: 15.0,
            weekly_amplitude: 5.0,
            da_noise: 3.0,
            id_spread: 6.0,
            id_persistence: 0.7,
            currency: Currency::USD,
        }
    }
}

/// Deterministic demo prices: a daily sine with evening peak, a weekly
/// swing, and an intraday curve that wanders around the day-ahead one.
pub fn synthetic_prices(grid: &TimeGrid, profile: &SyntheticProfile, seed: u64) -> PriceMap {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut da = Vec::with_capacity(grid.len());
    let mut id = Vec::with_capacity(grid.len());
    let mut dev = 0.0;
    let innovation = profile.id_spread * (1.0 - profile.id_persistence.powi(2)).sqrt();
    for t in grid.hours() {
        let hod = (t % 24) as f64;
        let dow = ((t / 24) % 7) as f64;
        let daily = profile.daily_amplitude * (2.0 * std::f64::consts::PI * (hod - 12.0) / 24.0).sin();
        let weekly = profile.weekly_amplitude * (2.0 * std::f64::consts::PI * dow / 7.0).cos();
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let p = profile.base + daily + weekly + profile.da_noise * z1;
        dev = profile.id_persistence * dev + innovation * z2;
        da.push(p);
        id.push(p + dev);
    }
    let mut out = PriceMap::new();
    out.insert(Market::DA, PriceSeries::new(Market::DA, grid.t0, da, profile.currency));
    out.insert(Market::ID, PriceSeries::new(Market::ID, grid.t0, id, profile.currency));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_partitions() {
        let g = TimeGrid::new(0, 2, 3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.num_first_stage() + g.num_observed(), 4);
        assert!(TimeGrid::new(3, 2, 5).is_err());
        assert_eq!(TimeGrid::new(0, 4, 3).unwrap().num_observed(), 0);
    }

    #[test]
    fn three_hour_csv() {
        let csv = "hour,market,price\n0,DA,10\n0,ID,12\n1,DA,20\n1,ID,18\n2,DA,30\n2,ID,33\n";
        let g = TimeGrid::new(0, 0, 2).unwrap();
        let m = read_prices(csv.as_bytes(), &g, Currency::USD).unwrap();
        assert_eq!(m[&Market::DA].values, vec![10.0, 20.0, 30.0]);
        assert_eq!(m[&Market::ID].values, vec![12.0, 18.0, 33.0]);
    }
}
