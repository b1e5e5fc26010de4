//! Adding and withdrawing liquidity after the market has opened.
//!
//! A provider adding `ℓ` to a pool holding `Π` receives a share `α` of the
//! pre-existing pool, chosen so that the trade "swap `ℓ` for `α` of the
//! pool" is costless: `C(α/(1+α)·Π − ℓ/(1+α); Π) = 0`. Withdrawals are the
//! same with `ℓ ≤ 0` and `α ∈ (-1, 0)`.

use serde::Serialize;

use crate::engine::{Fill, MarketState};
use crate::error::{Error, Result};
use crate::measure::Payoff;
use crate::solver::{brent_with_values, expand_upper, Tolerance};

/// Relative tolerance for treating a provision as proportional to `Π`.
pub const PROPORTIONAL_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolShare {
    pub alpha: f64,
    /// `(Π + ℓ)/(1 + α)`
    pub liquidity: Payoff,
    /// Whether `ℓ` was a multiple of `Π`, the case in which quoted prices
    /// are unaffected.
    pub proportional: bool,
}

fn shifted_cost(state: &MarketState, ell: &Payoff, alpha: f64) -> Result<f64> {
    let pi = state.liquidity().values();
    let scale = 1.0 / (1.0 + alpha);
    let x: Vec<f64> = pi
        .iter()
        .zip(ell.values())
        .map(|(p, l)| scale * (alpha * p - l))
        .collect();
    state.cost_unchecked(&x)
}

pub fn is_proportional(pi: &Payoff, ell: &Payoff) -> bool {
    let t = ell[0] / pi[0];
    pi.values()
        .iter()
        .zip(ell.values())
        .all(|(p, l)| (l - t * p).abs() <= PROPORTIONAL_RTOL * (t * p).abs().max(f64::MIN_POSITIVE))
}

pub fn pool_liquidity(state: &MarketState, ell: &Payoff) -> Result<PoolShare> {
    state.space().check(ell)?;
    if !state.utility().is_liquidity_based() {
        return Err(Error::Unsupported("pooling requires a liquidity-based utility".into()));
    }
    if ell.is_zero() {
        return Err(Error::InvalidProvision("provision is zero".into()));
    }
    let provision = ell.is_nonnegative();
    if !provision && !ell.is_nonpositive() {
        return Err(Error::InvalidProvision(
            "provision must be all nonnegative or all nonpositive".into(),
        ));
    }
    let total = state.liquidity().add(ell);
    if !provision && !(total.ess_inf() > 0.0) {
        return Err(Error::InvalidProvision(format!(
            "withdrawal leaves essinf(Π + ℓ) = {}",
            total.ess_inf()
        )));
    }

    let mut err = None;
    let mut cbar = |a: f64| match shifted_cost(state, ell, a) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    };
    let alpha = if provision {
        let f0 = cbar(0.0);
        let (hi, fhi) = expand_upper(&mut cbar, 0.0, 1.0, 200)?;
        brent_with_values(&mut cbar, 0.0, f0, hi, fhi, Tolerance::with_xtol(1e-15 * hi.max(1.0)))?
    } else {
        let f0 = cbar(0.0);
        let mut gap = 0.5;
        let mut flo = cbar(-1.0 + gap);
        while flo >= 0.0 {
            gap *= 0.5;
            if gap < 1e-300 {
                return Err(Error::RootNotFound("could not bracket withdrawal share".into()));
            }
            flo = cbar(-1.0 + gap);
        }
        brent_with_values(&mut cbar, -1.0 + gap, flo, 0.0, f0, Tolerance::with_xtol(1e-15))?
    };
    if let Some(e) = err {
        return Err(e);
    }
    let liquidity = total.scale(1.0 / (1.0 + alpha));
    Ok(PoolShare {
        alpha,
        liquidity,
        proportional: is_proportional(state.liquidity(), ell),
    })
}

/// `(1+α) C(x/(1+α); Π*)` where `state` holds `Π*`.
pub fn cost_with_share(state: &MarketState, alpha: f64, x: &Payoff) -> Result<f64> {
    if !(alpha > -1.0) {
        return Err(Error::InvalidProvision(format!("share {alpha} must exceed -1")));
    }
    let k = 1.0 + alpha;
    Ok(k * state.cost(&x.scale(1.0 / k))?)
}

/// Whether bid and ask of every sample bet agree within `1e-9` before and
/// after pooling `ℓ = tΠ`.
pub fn oracle_invariance_check(state: &MarketState, t: f64, bets: &[Payoff]) -> Result<bool> {
    if t == 0.0 {
        return Ok(true);
    }
    let ell = state.liquidity().scale(t);
    oracle_invariance_for(state, &ell, bets)
}

/// As [`oracle_invariance_check`] for an arbitrary provision `ℓ`. Only
/// proportional provisions are guaranteed to pass.
pub fn oracle_invariance_for(state: &MarketState, ell: &Payoff, bets: &[Payoff]) -> Result<bool> {
    let share = pool_liquidity(state, ell)?;
    let after = state.with_liquidity(share.liquidity)?;
    let pooled = state.with_liquidity(state.liquidity().add(ell))?;
    for x in bets {
        let q0 = state.quote(x)?;
        for s in [&after, &pooled] {
            let q = s.quote(x)?;
            if (q.bid - q0.bid).abs() > 1e-9 || (q.ask - q0.ask).abs() > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A market whose pool is owned by named providers in fractions summing
/// to one. Providers join or leave at any time; trades and fees are shared
/// pro rata.
///
/// The pool trades on its total liquidity. For the homothetic utilities
/// supported here this coincides with trading `Π*` through
/// [`cost_with_share`].
#[derive(Debug, Clone)]
pub struct PooledMarket {
    state: MarketState,
    providers: Vec<Provider>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provider {
    pub name: String,
    pub fraction: f64,
    pub fees_earned: f64,
}

impl PooledMarket {
    /// Opens a market funded entirely by `founder`.
    pub fn open(state: MarketState, founder: &str) -> Self {
        Self {
            state,
            providers: vec![Provider {
                name: founder.to_string(),
                fraction: 1.0,
                fees_earned: 0.0,
            }],
        }
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn fraction_of(&self, name: &str) -> f64 {
        self.providers
            .iter()
            .find(|p| p.name == name)
            .map_or(0.0, |p| p.fraction)
    }

    /// Adds (`ℓ ≥ 0`) or withdraws (`ℓ ≤ 0`) liquidity on behalf of `name`.
    /// Returns the share bought relative to the pool before the event.
    pub fn provide(&mut self, name: &str, ell: &Payoff) -> Result<PoolShare> {
        let share = pool_liquidity(&self.state, ell)?;
        let alpha = share.alpha;
        let held = self.fraction_of(name);
        if held + alpha < -1e-12 {
            return Err(Error::InvalidProvision(format!(
                "{name} holds {held} of the pool and cannot withdraw {}",
                -alpha
            )));
        }
        let next = self.state.with_liquidity(self.state.liquidity().add(ell))?;
        for p in &mut self.providers {
            p.fraction /= 1.0 + alpha;
        }
        match self.providers.iter_mut().find(|p| p.name == name) {
            Some(p) => p.fraction = ((held + alpha) / (1.0 + alpha)).max(0.0),
            None => self.providers.push(Provider {
                name: name.to_string(),
                fraction: alpha / (1.0 + alpha),
                fees_earned: 0.0,
            }),
        }
        self.state = next;
        Ok(share)
    }

    pub fn apply_bet(&mut self, x: &Payoff) -> Result<Fill> {
        let fill = self.state.apply_bet(x)?;
        for p in &mut self.providers {
            p.fees_earned += p.fraction * fill.fee;
        }
        self.state = fill.state.clone();
        Ok(fill)
    }

    /// Each provider's terminal payout if outcome `atom` occurs.
    pub fn payouts(&self, atom: usize) -> Vec<(String, f64)> {
        let pool = self.state.liquidity()[atom];
        self.providers
            .iter()
            .map(|p| (p.name.clone(), p.fraction * pool))
            .collect()
    }
}
