//! Money-line quotes and the prices implied by them.
//!
//! A negative line `m` means staking `|m|` to win 100; a positive line means
//! staking 100 to win `m`. The implied ask probability is the stake over
//! the total return. Lines strictly between -100 and 100 are not quoted by
//! books and are rejected.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoneyLineRow {
    pub timestamp: i64,
    pub ml_a: i64,
    pub ml_b: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoneyLineSeries {
    rows: Vec<MoneyLineRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceRow {
    pub timestamp: i64,
    pub bid: f64,
    pub ask: f64,
    pub mid: f64,
}

/// Bid, ask and mid probabilities of team A over time.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    rows: Vec<PriceRow>,
}

pub fn moneyline_to_ask_prob(m: i64) -> Result<f64> {
    if m <= -100 {
        let stake = -m as f64;
        Ok(stake / (stake + 100.0))
    } else if m >= 100 {
        Ok(100.0 / (m as f64 + 100.0))
    } else {
        Err(Error::MalformedMoneyLine(m))
    }
}

/// The line quoting ask probability `p`, rounded in the book's favour so
/// that the quoted probability is never below `p`.
pub fn ask_prob_to_moneyline(p: f64) -> Result<i64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::PriceOutOfRange(p));
    }
    // snap values that are integral up to rounding noise
    let snap = |v: f64, up: bool| {
        let r = v.round();
        if (v - r).abs() < 1e-9 * r.abs().max(1.0) {
            r
        } else if up {
            v.ceil()
        } else {
            v.floor()
        }
    };
    if p >= 0.5 {
        Ok(-(snap(100.0 * p / (1.0 - p), true) as i64))
    } else {
        Ok(snap(100.0 * (1.0 - p) / p, false) as i64)
    }
}

impl MoneyLineSeries {
    pub fn new(rows: Vec<MoneyLineRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSeries("no rows".into()));
        }
        for pair in rows.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvalidSeries(format!(
                    "timestamps not strictly increasing at {}",
                    pair[1].timestamp
                )));
            }
        }
        for r in &rows {
            let a = moneyline_to_ask_prob(r.ml_a)?;
            let b = moneyline_to_ask_prob(r.ml_b)?;
            if a + b < 1.0 - 1e-12 {
                return Err(Error::InvalidSeries(format!(
                    "asks at {} sum to {} < 1",
                    r.timestamp,
                    a + b
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[MoneyLineRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads a CSV with header `timestamp,ml_a,ml_b`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<MoneyLineRow>, _>>()?;
        Self::new(rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl PriceSeries {
    pub fn new(rows: Vec<PriceRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSeries("no rows".into()));
        }
        for r in &rows {
            for p in [r.bid, r.ask, r.mid] {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::PriceOutOfRange(p));
                }
            }
            if !(r.bid <= r.mid && r.mid <= r.ask) {
                return Err(Error::InvalidSeries(format!(
                    "row {} has bid {} mid {} ask {}",
                    r.timestamp, r.bid, r.mid, r.ask
                )));
            }
        }
        for pair in rows.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvalidSeries(format!(
                    "timestamps not strictly increasing at {}",
                    pair[1].timestamp
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Series whose bid, ask and mid all equal the given probabilities.
    pub fn from_mids(timestamps: &[i64], mids: &[f64]) -> Result<Self> {
        let rows = timestamps
            .iter()
            .zip(mids)
            .map(|(&timestamp, &mid)| PriceRow {
                timestamp,
                bid: mid,
                ask: mid,
                mid,
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[PriceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Smallest fee level whose no-trade band around the mid contains the
    /// quoted bid and ask on every row.
    pub fn spread_covering_fee(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| ((r.ask - r.mid) / r.mid).max((r.mid - r.bid) / (1.0 - r.mid)))
            .fold(0.0, f64::max)
    }
}

pub fn series_to_prices(s: &MoneyLineSeries) -> Result<PriceSeries> {
    let rows = s
        .rows()
        .iter()
        .map(|r| {
            let ask_a = moneyline_to_ask_prob(r.ml_a)?;
            let ask_b = moneyline_to_ask_prob(r.ml_b)?;
            let total = ask_a + ask_b;
            if total < 1.0 - 1e-12 {
                return Err(Error::InvalidSeries(format!(
                    "asks at {} sum to {total} < 1",
                    r.timestamp
                )));
            }
            let mid = ask_a / total;
            // an exact zero-spread book collapses the band onto the mid
            let (bid, ask) = if (total - 1.0).abs() <= 1e-12 {
                (mid, mid)
            } else {
                ((1.0 - ask_b).min(mid), ask_a.max(mid))
            };
            Ok(PriceRow {
                timestamp: r.timestamp,
                bid,
                ask,
                mid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PriceSeries::new(rows)
}

/// Parameters of the synthetic money-line fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub rows: usize,
    /// Book overround in basis points: the two asks sum to `1 + spread/1e4`.
    pub spread_bps: f64,
    /// Seconds between quotes.
    pub cadence: i64,
    pub start: i64,
    /// Long-run probability of team A.
    pub anchor: f64,
    /// Mean-reversion speed of the logit mid, per day.
    pub reversion: f64,
    /// Volatility of the logit mid, per square-root day.
    pub volatility: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            rows: 2016,
            spread_bps: 400.0,
            cadence: 600,
            start: 1_675_209_600,
            anchor: 0.52,
            reversion: 0.5,
            volatility: 0.08,
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A reproducible money-line series: an Ornstein–Uhlenbeck mid in logit
/// space quoted with a constant overround. This is a test fixture, not
/// market data.
pub fn synth_fixture(cfg: &SynthConfig) -> Result<MoneyLineSeries> {
    if cfg.rows < 2 {
        return Err(Error::InvalidConfig("fixture needs at least two rows".into()));
    }
    if !(cfg.spread_bps >= 0.0 && cfg.spread_bps < 5000.0) {
        return Err(Error::InvalidConfig(format!("spread {} bps out of range", cfg.spread_bps)));
    }
    if cfg.cadence <= 0 {
        return Err(Error::InvalidConfig("cadence must be positive".into()));
    }
    let overround = cfg.spread_bps / 1e4;
    let dt = cfg.cadence as f64 / 86_400.0;
    let mu = logit(cfg.anchor);
    let decay = (-cfg.reversion * dt).exp();
    let sd = if cfg.reversion > 0.0 {
        cfg.volatility * ((1.0 - decay * decay) / (2.0 * cfg.reversion)).sqrt()
    } else {
        cfg.volatility * dt.sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = mu;
    let mut rows = Vec::with_capacity(cfg.rows);
    for i in 0..cfg.rows {
        if i > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = mu + (x - mu) * decay + sd * z;
        }
        let mid = logistic(x);
        let ml_a = ask_prob_to_moneyline((mid * (1.0 + overround)).min(0.99))?;
        let ml_b = if overround == 0.0 {
            -ml_a
        } else {
            ask_prob_to_moneyline(((1.0 - mid) * (1.0 + overround)).min(0.99))?
        };
        rows.push(MoneyLineRow {
            timestamp: cfg.start + i as i64 * cfg.cadence,
            ml_a,
            ml_b,
        });
    }
    MoneyLineSeries::new(rows)
}
