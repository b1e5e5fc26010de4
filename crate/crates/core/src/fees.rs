//! Explicit trading fees.
//!
//! A fee level `γ` marks up the part of the cost that exceeds the
//! guaranteed payout: `C_γ(x) = (1+γ) C(x) - γ essinf x`. The pool still
//! moves by the no-fee cost; the difference is paid to liquidity providers.

use serde::{Deserialize, Serialize};

use crate::engine::{MarketState, Quote};
use crate::error::{Error, Result};
use crate::measure::Payoff;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeSchedule {
    gamma: f64,
}

impl FeeSchedule {
    pub fn new(gamma: f64) -> Result<Self> {
        check_fee_level(gamma)?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

pub fn check_fee_level(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::FeeOutOfRange(gamma))
    }
}

/// `(charged, fee)` for a bet with no-fee cost `cost` and worst-case
/// payout `ess_inf`.
pub fn charge(gamma: f64, cost: f64, ess_inf: f64) -> (f64, f64) {
    let fee = gamma * (cost - ess_inf).max(0.0);
    (cost + fee, fee)
}

pub fn cost_with_fees(state: &MarketState, gamma: f64, x: &Payoff) -> Result<(f64, f64)> {
    check_fee_level(gamma)?;
    let cost = state.cost(x)?;
    Ok(charge(gamma, cost, x.ess_inf()))
}

/// Fee-adjusted bid and ask. The measure, when present, is the no-fee one,
/// which still lies inside the widened band.
pub fn oracle_with_fees(state: &MarketState, gamma: f64, x: &Payoff) -> Result<Quote> {
    check_fee_level(gamma)?;
    let q = state.quote(x)?;
    Ok(Quote {
        ask: (1.0 + gamma) * q.ask - gamma * x.ess_inf(),
        bid: (1.0 + gamma) * q.bid - gamma * x.ess_sup(),
        measure: q.measure,
    })
}

/// Whether the charged amount strictly increases along `gammas`.
pub fn fee_monotonicity_check(state: &MarketState, x: &Payoff, gammas: &[f64]) -> Result<bool> {
    let mut charged = Vec::with_capacity(gammas.len());
    for &g in gammas {
        charged.push(cost_with_fees(state, g, x)?.0);
    }
    Ok(charged.windows(2).all(|w| w[1] > w[0]))
}
