//! Monte Carlo study of fee levels.
//!
//! A latent "true" price for team A follows an arithmetic Brownian motion
//! started at the first mid and reflected into the book's bid-ask band.
//! Whenever the market's fee-inclusive ask is below that price, or its
//! fee-inclusive bid above it, an arbitrageur trades until the relevant
//! quote equals the price. The market is a StableSwap maker whose
//! reference probabilities follow the book's mid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TwoAtom;
use crate::error::{Error, Result};
use crate::fees::check_fee_level;
use crate::ingest::PriceSeries;

const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticRunConfig {
    /// Annualized volatilities of the latent price.
    pub sigmas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub n_paths: usize,
    /// Simulation step in seconds.
    pub dt: f64,
    pub seed: u64,
    pub lambda: f64,
}

impl Default for StochasticRunConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.05, 0.25, 0.5],
            gammas: (0..=10).map(|i| 0.005 * i as f64).collect(),
            n_paths: 500,
            dt: 60.0,
            seed: 7,
            lambda: 2.0,
        }
    }
}

impl StochasticRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig("volatilities must be positive".into()));
        }
        if self.gammas.is_empty() {
            return Err(Error::InvalidConfig("fee grid is empty".into()));
        }
        for &g in &self.gammas {
            check_fee_level(g)?;
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("need at least one path".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Summary for one `(σ, γ)` cell. Profits are fractions of the initial
/// cash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticCell {
    pub sigma: f64,
    pub gamma: f64,
    /// Fees plus the terminal pool valued at the final mid, less the
    /// initial cash.
    pub mean_profit: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_fees: f64,
    pub fees_ci_low: f64,
    pub fees_ci_high: f64,
    pub mean_trades: f64,
    /// Paths on which at least one trade occurred.
    pub paths_with_trades: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticTable {
    pub config: StochasticRunConfig,
    /// Smallest fee level whose no-trade band covers every quoted spread.
    pub spread_covering_fee: f64,
    pub cells: Vec<StochasticCell>,
}

impl StochasticTable {
    pub fn cell(&self, sigma: f64, gamma: f64) -> Option<&StochasticCell> {
        self.cells.iter().find(|c| c.sigma == sigma && c.gamma == gamma)
    }

    /// Fee level with the largest mean profit at `sigma`.
    pub fn best_fee(&self, sigma: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.sigma == sigma)
            .max_by(|a, b| a.mean_profit.total_cmp(&b.mean_profit))
            .map(|c| c.gamma)
    }

    /// Fee level with the largest mean fee income at `sigma`.
    pub fn best_fee_by_fees(&self, sigma: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.sigma == sigma)
            .max_by(|a, b| a.mean_fees.total_cmp(&b.mean_fees))
            .map(|c| c.gamma)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathResult {
    profit: f64,
    fees: f64,
    trades: u32,
}

/// Folds `x` back into `[lo, hi]` by repeated reflection at the edges.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let y = (x - lo).rem_euclid(2.0 * width);
    if y > width {
        lo + 2.0 * width - y
    } else {
        lo + y
    }
}

struct Maker {
    a: f64,
    b: f64,
    fees: f64,
    trades: u32,
    price: f64,
}

fn simulate_path(prices: &PriceSeries, cfg: &StochasticRunConfig, sigma: f64, path: u64) -> Vec<PathResult> {
    let rows = prices.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let step_sd = sigma * (cfg.dt / SECONDS_PER_YEAR).sqrt();

    let mid0 = rows[0].mid;
    let mut pool = TwoAtom {
        w: mid0,
        lambda: cfg.lambda,
    };
    let mut makers: Vec<Maker> = cfg
        .gammas
        .iter()
        .map(|_| Maker {
            a: 1.0,
            b: 1.0,
            fees: 0.0,
            trades: 0,
            price: mid0,
        })
        .collect();
    let mut p = mid0;

    for (k, row) in rows.iter().enumerate() {
        if pool.w != row.mid {
            pool.w = row.mid;
            for m in &mut makers {
                m.price = pool.price_a(m.a, m.b);
            }
        }
        p = reflect(p, row.bid, row.ask);
        let Some(next) = rows.get(k + 1) else { break };
        let steps = ((next.timestamp - row.timestamp) as f64 / cfg.dt).round().max(1.0) as usize;
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            p = reflect(p + step_sd * z, row.bid, row.ask);
            for (m, &g) in makers.iter_mut().zip(&cfg.gammas) {
                let ask = (1.0 + g) * m.price;
                let bid = ask - g;
                let target = if p > ask {
                    p / (1.0 + g)
                } else if p < bid {
                    (p + g) / (1.0 + g)
                } else {
                    continue;
                };
                let (a, b) = pool.move_to(m.a, m.b, target);
                // bet on A alone: stake Π_A - Π'_A + C with cost C = Π'_B - Π_B
                let cost = b - m.b;
                let stake = m.a - a + cost;
                m.fees += g * (cost - stake.min(0.0));
                m.a = a;
                m.b = b;
                m.price = pool.price_a(a, b);
                m.trades += 1;
            }
        }
    }

    let mid_t = rows[rows.len() - 1].mid;
    makers
        .iter()
        .map(|m| PathResult {
            profit: m.fees + mid_t * m.a + (1.0 - mid_t) * m.b - 1.0,
            fees: m.fees,
            trades: m.trades,
        })
        .collect()
}

fn mean_ci(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, mean, mean);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Runs every `(σ, γ)` cell. All fee levels and volatilities share the
/// same normal draws on a given path, and each path draws from its own
/// stream, so results do not depend on the number of threads.
pub fn backtest_stochastic(prices: &PriceSeries, cfg: &StochasticRunConfig) -> Result<StochasticTable> {
    cfg.validate()?;
    if prices.len() < 2 {
        return Err(Error::InvalidSeries("need at least two rows".into()));
    }
    let mut cells = Vec::with_capacity(cfg.sigmas.len() * cfg.gammas.len());
    for &sigma in &cfg.sigmas {
        let per_path: Vec<Vec<PathResult>> = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_path(prices, cfg, sigma, i))
            .collect();
        for (j, &gamma) in cfg.gammas.iter().enumerate() {
            let column = per_path.iter().map(|r| r[j]);
            let (mean_profit, ci_low, ci_high) = mean_ci(column.clone().map(|r| r.profit));
            let (mean_fees, fees_ci_low, fees_ci_high) = mean_ci(column.clone().map(|r| r.fees));
            let mean_trades = column.clone().map(|r| r.trades as f64).sum::<f64>() / cfg.n_paths as f64;
            let paths_with_trades = column.filter(|r| r.trades > 0).count();
            cells.push(StochasticCell {
                sigma,
                gamma,
                mean_profit,
                ci_low,
                ci_high,
                mean_fees,
                fees_ci_low,
                fees_ci_high,
                mean_trades,
                paths_with_trades,
            });
        }
    }
    Ok(StochasticTable {
        config: cfg.clone(),
        spread_covering_fee: prices.spread_covering_fee(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_stays_in_band() {
        assert_eq!(reflect(0.5, 0.4, 0.6), 0.5);
        assert!((reflect(0.65, 0.4, 0.6) - 0.55).abs() < 1e-15);
        assert!((reflect(0.35, 0.4, 0.6) - 0.45).abs() < 1e-15);
        assert!((reflect(0.95, 0.4, 0.6) - 0.55).abs() < 1e-12);
        assert_eq!(reflect(0.9, 0.5, 0.5), 0.5);
    }

    #[test]
    fn ci_of_constant_sample_is_degenerate() {
        let (m, lo, hi) = mean_ci([2.0, 2.0, 2.0].into_iter());
        assert_eq!((m, lo, hi), (2.0, 2.0, 2.0));
    }
}
