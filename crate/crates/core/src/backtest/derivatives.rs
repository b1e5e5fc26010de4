//! An options market on a discretized terminal asset price.
//!
//! Atoms are price levels on a log-uniform grid with lognormal weights. A
//! market funded with equal cash in every state quotes exactly this
//! lognormal, and buying options moves the implied distribution.

use serde::{Deserialize, Serialize};

use crate::engine::MarketState;
use crate::error::{Error, Result};
use crate::measure::{DensityVector, OutcomeSpace, Payoff};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalGrid {
    pub spot: f64,
    pub sigma: f64,
    pub rate: f64,
    /// Time to expiry in years.
    pub tau: f64,
    pub atoms: usize,
    /// Half-width of the grid in log-standard-deviations.
    pub width: f64,
}

impl Default for LognormalGrid {
    fn default() -> Self {
        Self {
            spot: 1.0,
            sigma: 0.25,
            rate: 0.0,
            tau: 1.0,
            atoms: 2001,
            width: 6.0,
        }
    }
}

impl LognormalGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.spot > 0.0
            && self.sigma > 0.0
            && self.tau > 0.0
            && self.rate.is_finite()
            && self.atoms >= 3
            && self.width > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid lognormal grid {self:?}")))
        }
    }

    /// Price levels and the outcome space carrying their probabilities.
    ///
    /// Levels are equally spaced in standardized log-price `z`, so the
    /// weight of a level is proportional to the normal density at `z`.
    pub fn build(&self) -> Result<(Vec<f64>, OutcomeSpace)> {
        self.validate()?;
        let sd = self.sigma * self.tau.sqrt();
        let drift = self.spot.ln() + (self.rate - 0.5 * self.sigma * self.sigma) * self.tau;
        let n = self.atoms;
        let step = 2.0 * self.width / (n - 1) as f64;
        let mut levels = Vec::with_capacity(n);
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let z = -self.width + step * i as f64;
            levels.push((drift + sd * z).exp());
            raw.push((-0.5 * z * z).exp());
        }
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // put the rounding residue on the central atom
        let residue = 1.0 - weights.iter().sum::<f64>();
        weights[n / 2] += residue;
        let labels = (0..n).map(|i| format!("s{i}")).collect();
        Ok((levels, OutcomeSpace::new(labels, weights)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptionKind {
    Put { strike: f64 },
    /// `min((S-K)⁺, cap)`
    CappedCall { strike: f64, cap: f64 },
    /// Uncapped call; refused by the market.
    Call { strike: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionTrade {
    #[serde(flatten)]
    pub kind: OptionKind,
    pub quantity: f64,
}

impl OptionKind {
    pub fn payoff(&self, levels: &[f64]) -> Result<Payoff> {
        let v = match *self {
            OptionKind::Put { strike } => levels.iter().map(|s| (strike - s).max(0.0)).collect(),
            OptionKind::CappedCall { strike, cap } => {
                if !(cap >= 0.0 && cap.is_finite()) {
                    return Err(Error::InvalidConfig(format!("cap must be nonnegative, got {cap}")));
                }
                levels.iter().map(|s| (s - strike).max(0.0).min(cap)).collect()
            }
            OptionKind::Call { strike } => {
                return Err(Error::Unbounded(format!(
                    "a call struck at {strike} has unbounded payoff; give it a cap"
                )))
            }
        };
        Payoff::new(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeCost {
    pub trade: OptionTrade,
    pub cost: f64,
    pub per_contract: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativesRun {
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
    pub trades: Vec<TradeCost>,
    /// Pricing density before any trade and after each one.
    pub snapshots: Vec<DensityVector>,
}

/// Market on `grid` funded with `cash` per state under the essinf-mix of
/// the log utility with parameter `epsilon`.
pub fn options_market(grid: &LognormalGrid, cash: f64, epsilon: f64) -> Result<(Vec<f64>, MarketState)> {
    if !(cash > 0.0 && cash.is_finite()) {
        return Err(Error::InvalidConfig(format!("cash must be positive, got {cash}")));
    }
    let (levels, space) = grid.build()?;
    let spec = UtilitySpec::ess_inf_mix(UtilitySpec::Log, epsilon);
    let state = MarketState::with_cash(space, spec, cash)?;
    Ok((levels, state))
}

/// Places `trades` in order and records the implied density after each.
pub fn derivatives_market(grid: &LognormalGrid, cash: f64, epsilon: f64, trades: &[OptionTrade]) -> Result<DerivativesRun> {
    let (levels, mut state) = options_market(grid, cash, epsilon)?;
    let mut snapshots = vec![state.selected_measure()?];
    let mut costs = Vec::with_capacity(trades.len());
    for t in trades {
        let x = t.kind.payoff(&levels)?.scale(t.quantity);
        let fill = state.apply_bet(&x)?;
        state = fill.state;
        costs.push(TradeCost {
            trade: *t,
            cost: fill.cost,
            per_contract: if t.quantity == 0.0 { 0.0 } else { fill.cost / t.quantity },
        });
        snapshots.push(state.selected_measure()?);
    }
    Ok(DerivativesRun {
        weights: state.space().weights().to_vec(),
        levels,
        trades: costs,
        snapshots,
    })
}

/// Shape of a density snapshot around a strike.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkDiagnostic {
    pub strike: f64,
    /// Level with the largest absolute second difference of the density
    /// inside the central region of the grid.
    pub kink_level: f64,
    /// Grid cells between the kink and the strike.
    pub cells_from_strike: usize,
    /// Density slope per unit price just below and just above the strike.
    pub slope_below: f64,
    pub slope_above: f64,
    /// Mean price under the snapshot and under the grid weights.
    pub mean_after: f64,
    pub mean_before: f64,
}

impl KinkDiagnostic {
    /// Mass moved toward lower prices and the density bends at the strike.
    pub fn shows_put_signature(&self) -> bool {
        self.mean_after < self.mean_before && self.cells_from_strike <= 2 && self.slope_below < 0.0 && self.slope_below < self.slope_above
    }
}

/// Locates the kink of `density` near `strike`, searching the levels within
/// `core` log-standard-deviations of the grid centre.
pub fn kink_diagnostic(levels: &[f64], space: &OutcomeSpace, density: &DensityVector, strike: f64, core: f64, grid: &LognormalGrid) -> KinkDiagnostic {
    let n = levels.len();
    let q = density.values();
    let step = 2.0 * grid.width / (n - 1) as f64;
    let half = ((core / step).floor() as usize).min(n / 2 - 1);
    let (lo, hi) = (n / 2 - half, n / 2 + half);
    let mut best = lo;
    let mut best_val = -1.0;
    for i in lo.max(1)..hi.min(n - 1) {
        let d2 = (q[i + 1] - 2.0 * q[i] + q[i - 1]).abs();
        if d2 > best_val {
            best_val = d2;
            best = i;
        }
    }
    let k = levels.partition_point(|s| *s < strike).clamp(2, n - 3);
    let slope_below = (q[k - 1] - q[k - 2]) / (levels[k - 1] - levels[k - 2]);
    let slope_above = (q[k + 2] - q[k + 1]) / (levels[k + 2] - levels[k + 1]);
    let level_payoff = Payoff::new(levels.to_vec()).expect("grid levels are finite");
    let mean_after = space.expect(&level_payoff, Some(density)).unwrap_or(f64::NAN);
    let mean_before = space.expect(&level_payoff, None).unwrap_or(f64::NAN);
    KinkDiagnostic {
        strike,
        kink_level: levels[best],
        cells_from_strike: best.abs_diff(k).min(best.abs_diff(k.saturating_sub(1))),
        slope_below,
        slope_above,
        mean_after,
        mean_before,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CashMode {
    /// Same initial cash for every cap.
    Fixed,
    /// Initial cash scaled with the cap, equal to the reference cash at a
    /// cap of one.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapPoint {
    pub cap: f64,
    pub cash: f64,
    /// Total cost of the contracts.
    pub cost: f64,
}

/// Cost of `quantity` capped calls struck at `strike` for each cap in
/// `caps`, each priced on a freshly opened market.
pub fn capped_call_study(
    grid: &LognormalGrid,
    strike: f64,
    caps: &[f64],
    quantity: f64,
    cash: f64,
    epsilon: f64,
    mode: CashMode,
) -> Result<Vec<CapPoint>> {
    let (levels, space) = grid.build()?;
    let spec = UtilitySpec::ess_inf_mix(UtilitySpec::Log, epsilon);
    caps.iter()
        .map(|&cap| {
            let l = match mode {
                CashMode::Fixed => cash,
                CashMode::Proportional => cash * cap,
            };
            let x = OptionKind::CappedCall { strike, cap }.payoff(&levels)?.scale(quantity);
            let cost = if x.is_zero() {
                0.0
            } else {
                MarketState::with_cash(space.clone(), spec.clone(), l)?.cost(&x)?
            };
            Ok(CapPoint { cap, cash: l, cost })
        })
        .collect()
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn d1_d2(spot: f64, strike: f64, sigma: f64, rate: f64, tau: f64) -> (f64, f64) {
    let v = sigma * tau.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * tau) / v;
    (d1, d1 - v)
}

pub fn black_scholes_put(spot: f64, strike: f64, sigma: f64, rate: f64, tau: f64) -> f64 {
    let disc = strike * (-rate * tau).exp();
    if strike <= 0.0 {
        return 0.0;
    }
    if sigma * tau.sqrt() == 0.0 {
        return (disc - spot).max(0.0);
    }
    let (d1, d2) = d1_d2(spot, strike, sigma, rate, tau);
    disc * norm_cdf(-d2) - spot * norm_cdf(-d1)
}

pub fn black_scholes_call(spot: f64, strike: f64, sigma: f64, rate: f64, tau: f64) -> f64 {
    let disc = strike * (-rate * tau).exp();
    if strike <= 0.0 {
        return spot - disc;
    }
    if sigma * tau.sqrt() == 0.0 {
        return (spot - disc).max(0.0);
    }
    let (d1, d2) = d1_d2(spot, strike, sigma, rate, tau);
    spot * norm_cdf(d1) - disc * norm_cdf(d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_a_valid_space() {
        let (levels, space) = LognormalGrid::default().build().unwrap();
        assert_eq!(levels.len(), 2001);
        assert!(levels.windows(2).all(|w| w[0] < w[1]));
        let mean = space.expect(&Payoff::new(levels).unwrap(), None).unwrap();
        assert!((mean - 1.0).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn fresh_market_quotes_the_grid() {
        let run = derivatives_market(&LognormalGrid::default(), 100.0, 1e-6, &[]).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert!(run.snapshots[0].values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn uncapped_calls_are_refused() {
        let t = OptionTrade {
            kind: OptionKind::Call { strike: 1.0 },
            quantity: 1.0,
        };
        assert!(matches!(
            derivatives_market(&LognormalGrid::default(), 100.0, 1e-6, &[t]),
            Err(Error::Unbounded(_))
        ));
    }

    #[test]
    fn black_scholes_edges() {
        assert_eq!(black_scholes_put(1.0, 0.0, 0.2, 0.0, 1.0), 0.0);
        assert_eq!(black_scholes_put(1.2, 1.0, 0.0, 0.01, 1.0), 0.0);
        let p = black_scholes_put(1.0, 1.1, 0.3, 0.02, 0.5);
        let c = black_scholes_call(1.0, 1.1, 0.3, 0.02, 0.5);
        assert!((c - p - (1.0 - 1.1 * (-0.01f64).exp())).abs() < 1e-12);
    }
}
