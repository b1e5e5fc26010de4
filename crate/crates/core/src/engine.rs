//! Market state, the indifference cost solver and the pricing oracles.
//!
//! The cost of a bet `x` is the cash `c` that leaves the maker's utility
//! unchanged once it pays out `x` and receives `c`:
//! `u(Π - x + c·1) = u(Π)`, with `c` in `[essinf x, esssup x]`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fees;
use crate::measure::{DensityVector, OutcomeSpace, Payoff};
use crate::solver::{brent_with_values, Tolerance};
use crate::utility::{self, UtilitySpec};

/// Relative bracket width at which the cost root finder stops.
pub const COST_XTOL: f64 = 1e-13;

/// Relative first step of the one-sided difference quotients used for
/// nonsmooth oracles.
pub const RICHARDSON_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    space: Arc<OutcomeSpace>,
    utility: UtilitySpec,
    liquidity: Payoff,
    fees_collected: f64,
    fee_level: f64,
}

/// Bid and ask for a single bet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quote {
    pub bid: f64,
    pub ask: f64,
    /// Implied pricing density, when the oracle is linear at this state.
    /// `None` means only the interval `[bid, ask]` is available.
    pub measure: Option<DensityVector>,
}

/// Result of [`MarketState::apply_bet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fill {
    pub state: MarketState,
    /// No-fee cost `C(x)`; the amount by which the pool changes.
    pub cost: f64,
    /// What the bettor pays, `C_γ(x)`.
    pub charged: f64,
    pub fee: f64,
}

/// Result of [`MarketState::optimal_bet`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalBet {
    pub bet: Payoff,
    /// `E^q[x*] - C(x*)`
    pub value: f64,
    /// Liquidity after the bet is placed.
    pub liquidity: Payoff,
}

impl MarketState {
    pub fn new(space: impl Into<Arc<OutcomeSpace>>, utility: UtilitySpec, liquidity: Payoff) -> Result<Self> {
        let space = space.into();
        utility.validate()?;
        space.check(&liquidity)?;
        let state = Self {
            space,
            utility,
            liquidity,
            fees_collected: 0.0,
            fee_level: 0.0,
        };
        state.check_domain()?;
        Ok(state)
    }

    /// Market funded with `cash` in every outcome.
    pub fn with_cash(space: impl Into<Arc<OutcomeSpace>>, utility: UtilitySpec, cash: f64) -> Result<Self> {
        let space = space.into();
        let n = space.len();
        Self::new(space, utility, Payoff::constant(n, cash))
    }

    pub fn with_fee_level(mut self, gamma: f64) -> Result<Self> {
        fees::check_fee_level(gamma)?;
        self.fee_level = gamma;
        Ok(self)
    }

    /// Same pool and fee history under a different liquidity vector.
    pub fn with_liquidity(&self, liquidity: Payoff) -> Result<Self> {
        self.space.check(&liquidity)?;
        let state = Self {
            liquidity,
            ..self.clone()
        };
        state.check_domain()?;
        Ok(state)
    }

    /// Same pool under new reference probabilities.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let space = Arc::new(self.space.reweighted(weights)?);
        Ok(Self {
            space,
            ..self.clone()
        })
    }

    fn check_domain(&self) -> Result<()> {
        if self.utility.is_liquidity_based() {
            let lo = self.liquidity.ess_inf();
            if !(lo > 0.0) {
                return Err(Error::Domain(lo));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<OutcomeSpace> {
        Arc::clone(&self.space)
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    pub fn liquidity(&self) -> &Payoff {
        &self.liquidity
    }

    pub fn fees_collected(&self) -> f64 {
        self.fees_collected
    }

    pub fn fee_level(&self) -> f64 {
        self.fee_level
    }

    pub fn utility_level(&self) -> f64 {
        utility::utility_eval(&self.utility, &self.space, &self.liquidity)
    }

    fn check_bet(&self, x: &Payoff) -> Result<()> {
        self.space.check(x)?;
        if let Some(i) = x.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    /// No-fee cost `C(x; Π)`.
    pub fn cost(&self, x: &Payoff) -> Result<f64> {
        self.check_bet(x)?;
        self.cost_unchecked(x.values())
    }

    pub(crate) fn cost_unchecked(&self, x: &[f64]) -> Result<f64> {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Ok(lo);
        }
        if let UtilitySpec::Hanson { risk_aversion } = self.utility {
            let payouts = self.liquidity.scale(-1.0);
            return utility::hanson_cost(&self.space, risk_aversion, &payouts, &Payoff::from_vec_unchecked(x.to_vec()));
        }
        let pi = self.liquidity.values();
        let mut delta = vec![0.0; x.len()];
        let mut gap = |c: f64| {
            for (d, xi) in delta.iter_mut().zip(x) {
                *d = c - xi;
            }
            utility::utility_delta(&self.utility, &self.space, pi, &delta)
        };
        let flo = gap(lo);
        let fhi = gap(hi);
        let tol = Tolerance::with_xtol(COST_XTOL * (hi - lo));
        let c = brent_with_values(&mut gap, lo, flo, hi, fhi, tol)?;
        Ok(c.clamp(lo, hi))
    }

    /// Places `x`, charging the fee-inclusive cost. The pool moves by the
    /// no-fee cost; the fee is paid out to liquidity providers.
    pub fn apply_bet(&self, x: &Payoff) -> Result<Fill> {
        let cost = self.cost(x)?;
        let (charged, fee) = fees::charge(self.fee_level, cost, x.ess_inf());
        let next: Vec<f64> = self
            .liquidity
            .values()
            .iter()
            .zip(x.values())
            .map(|(p, xi)| p - xi + cost)
            .collect();
        let mut state = self.with_liquidity(Payoff::from_vec_unchecked(next))?;
        state.fees_collected += fee;
        Ok(Fill {
            state,
            cost,
            charged,
            fee,
        })
    }

    /// Normalized gradient of `u` at the current liquidity. `None` when the
    /// utility is not differentiable here.
    pub fn pricing_measure(&self) -> Option<DensityVector> {
        match self.utility {
            UtilitySpec::Hanson { risk_aversion } => {
                let payouts = self.liquidity.scale(-1.0);
                let d = utility::hanson_density(&self.space, risk_aversion, &payouts);
                DensityVector::normalized(&self.space, d).ok()
            }
            _ => {
                let mut g = vec![0.0; self.space.len()];
                if utility::gradient_into(&self.utility, &self.space, self.liquidity.values(), &mut g, false) {
                    DensityVector::normalized(&self.space, g).ok()
                } else {
                    None
                }
            }
        }
    }

    /// A pricing measure that always exists: the normalized gradient where
    /// `u` is smooth, and at an essinf tie the supergradient that spreads the
    /// kink over the tied atoms by weight. Lies inside `[bid, ask]` for
    /// every bet.
    pub fn selected_measure(&self) -> Result<DensityVector> {
        if let Some(d) = self.pricing_measure() {
            return Ok(d);
        }
        let g = utility::supergradient(&self.utility, &self.space, &self.liquidity)?;
        DensityVector::normalized(&self.space, g.into_vec())
    }

    pub fn price_ask(&self, x: &Payoff) -> Result<f64> {
        Ok(self.quote(x)?.ask)
    }

    pub fn price_bid(&self, x: &Payoff) -> Result<f64> {
        Ok(self.quote(x)?.bid)
    }

    /// No-fee bid and ask of `x`.
    pub fn quote(&self, x: &Payoff) -> Result<Quote> {
        self.check_bet(x)?;
        if x.is_constant() {
            return Ok(Quote {
                bid: x[0],
                ask: x[0],
                measure: self.pricing_measure(),
            });
        }
        match self.pricing_measure() {
            Some(q) => {
                let p = self.space.expect(x, Some(&q))?;
                Ok(Quote {
                    bid: p,
                    ask: p,
                    measure: Some(q),
                })
            }
            None => {
                let ask = self.numeric_ask(x)?;
                let bid = -self.numeric_ask(&x.scale(-1.0))?;
                let (bid, ask) = if bid > ask {
                    let m = 0.5 * (bid + ask);
                    (m, m)
                } else {
                    (bid, ask)
                };
                Ok(Quote {
                    bid,
                    ask,
                    measure: None,
                })
            }
        }
    }

    /// `lim_{t↓0} C(tx)/t` estimated from difference quotients at
    /// `t0, t0/2, t0/4` with two rounds of Richardson extrapolation.
    pub fn numeric_ask(&self, x: &Payoff) -> Result<f64> {
        self.check_bet(x)?;
        let norm = x.sup_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let scale = if self.utility.is_liquidity_based() {
            self.liquidity.ess_inf()
        } else {
            1.0
        };
        let t0 = RICHARDSON_STEP * scale / norm;
        let quotient = |t: f64| -> Result<f64> {
            let tx: Vec<f64> = x.values().iter().map(|v| t * v).collect();
            Ok(self.cost_unchecked(&tx)? / t)
        };
        let d0 = quotient(t0)?;
        let d1 = quotient(0.5 * t0)?;
        let d2 = quotient(0.25 * t0)?;
        let r0 = 2.0 * d1 - d0;
        let r1 = 2.0 * d2 - d1;
        Ok((4.0 * r1 - r0) / 3.0)
    }

    /// Bettor's best response to a belief `q`: maximizes `E^q[x] - C(x)`.
    ///
    /// The post-trade liquidity `Π'` lies on the same utility level as `Π`
    /// and has pricing measure `q`. The returned bet is normalized so that
    /// it costs nothing, `x* = Π - Π'`; any `x* + c·1` is equally optimal.
    pub fn optimal_bet(&self, q: &DensityVector) -> Result<OptimalBet> {
        if q.len() != self.space.len() {
            return Err(Error::SpaceMismatch {
                expected: self.space.len(),
                got: q.len(),
            });
        }
        if !q.is_strictly_positive() {
            return Err(Error::InvalidDensity("belief must be strictly positive on every atom".into()));
        }
        let target = target_liquidity(&self.utility, &self.space, &self.liquidity, q.values())?;
        let bet: Vec<f64> = self
            .liquidity
            .values()
            .iter()
            .zip(&target)
            .map(|(p, t)| p - t)
            .collect();
        let bet = Payoff::new(bet)?;
        let value = self.space.expect(&bet, Some(q))?;
        Ok(OptimalBet {
            bet,
            value,
            liquidity: Payoff::new(target)?,
        })
    }
}

/// Liquidity on the level set of `u` through `pi` whose pricing density
/// is `q`.
pub(crate) fn target_liquidity(
    spec: &UtilitySpec,
    space: &OutcomeSpace,
    pi: &Payoff,
    q: &[f64],
) -> Result<Vec<f64>> {
    let w = space.weights();
    match spec {
        UtilitySpec::Log => {
            let log_kappa: f64 = w
                .iter()
                .zip(pi.values())
                .zip(q)
                .map(|((wi, p), qi)| wi * (p.ln() + qi.ln()))
                .sum();
            let kappa = log_kappa.exp();
            Ok(q.iter().map(|qi| kappa / qi).collect())
        }
        UtilitySpec::Hanson { risk_aversion } => {
            let g = *risk_aversion;
            let mean_exp: f64 = w.iter().zip(pi.values()).map(|(wi, p)| wi * (-g * p).exp()).sum();
            let log_k = mean_exp.ln();
            Ok(q.iter().map(|qi| -(qi.ln() + log_k) / g).collect())
        }
        UtilitySpec::StableSwap { lambda } => {
            let shape = kkt_shape(space, q, *lambda, 0.0)?;
            rescale_to_level(spec, space, pi, shape)
        }
        UtilitySpec::EssInfMix { base, .. } => {
            let lambda = match base.as_ref() {
                UtilitySpec::StableSwap { lambda } => *lambda,
                _ => 0.0,
            };
            let m = spec.mix_weight(space);
            let beta = m / (1.0 - m);
            let shape = kkt_shape(space, q, lambda, beta)?;
            rescale_to_level(spec, space, pi, shape)
        }
    }
}

/// Scales `shape` onto the level set `u = u(pi)` using homotheticity.
fn rescale_to_level(spec: &UtilitySpec, space: &OutcomeSpace, pi: &Payoff, shape: Vec<f64>) -> Result<Vec<f64>> {
    let a = spec
        .log_homogeneity(space)
        .ok_or_else(|| Error::Unsupported(format!("{spec} is not homothetic")))?;
    let level = utility::eval_raw(spec, space, pi.values());
    let at_shape = utility::eval_raw(spec, space, &shape);
    let k = ((level - at_shape) / a).exp();
    Ok(shape.into_iter().map(|v| k * v).collect())
}

/// Unscaled first-order solution for `(1-m)[E log Π + λ log EΠ] + m log min Π`
/// with supergradient proportional to `q`:
/// `v_i = max(f, 1/(q_i - ρ))` where `ρ E[v] = λ` and
/// `Σ w_i (f (q_i - ρ) - 1)⁺ = β`.
fn kkt_shape(space: &OutcomeSpace, q: &[f64], lambda: f64, beta: f64) -> Result<Vec<f64>> {
    let w = space.weights();
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]));

    let floor = |rho: f64| -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        // a_i = q_i - rho sorted descending; find the segment where exactly
        // the first j atoms sit at the floor
        let mut sum_w = 0.0;
        let mut sum_wa = 0.0;
        for (j, &i) in order.iter().enumerate() {
            let a = q[i] - rho;
            sum_w += w[i];
            sum_wa += w[i] * a;
            let f = (beta + sum_w) / sum_wa;
            let next_ok = order.get(j + 1).is_none_or(|&k| f * (q[k] - rho) <= 1.0);
            if f * a >= 1.0 && next_ok {
                return f;
            }
        }
        (beta + sum_w) / sum_wa
    };
    let shape_at = |rho: f64| -> Vec<f64> {
        let f = floor(rho);
        q.iter().map(|qi| f.max(1.0 / (qi - rho))).collect()
    };
    let rho = if lambda == 0.0 {
        0.0
    } else {
        let g = |rho: f64| {
            if rho >= q_min {
                return f64::INFINITY;
            }
            rho * space.mean(&shape_at(rho)) - lambda
        };
        let hi = q_min;
        crate::solver::brent(g, 0.0, hi, Tolerance::with_xtol(1e-15 * q_min))?
    };
    let v = shape_at(rho);
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::RootNotFound("degenerate first-order solution".into()));
    }
    Ok(v)
}
