//! Case studies: replaying a sports-book price series through a two-outcome
//! market, a Monte Carlo study of fee levels against arbitrage flow, and
//! an options market on a discretized lognormal price.

pub mod derivatives;
pub mod deterministic;
pub mod report;
pub mod stochastic;

use crate::engine::target_liquidity;
use crate::error::{Error, Result};
use crate::measure::{OutcomeSpace, Payoff};
use crate::utility::UtilitySpec;

pub use derivatives::{black_scholes_call, black_scholes_put, capped_call_study, derivatives_market, LognormalGrid};
pub use deterministic::{backtest_deterministic, BacktestReport};
pub use stochastic::{backtest_stochastic, StochasticRunConfig, StochasticTable};

/// Labels of the two outcomes in the sports-book studies.
pub const TEAMS: [&str; 2] = ["A", "B"];

/// Two-outcome liquidity whose log-utility price of team A is `mid`, with
/// `Π_A Π_B = L²`.
pub fn implied_liquidity_log(cash: f64, mid: f64) -> Result<Payoff> {
    if !(mid > 0.0 && mid < 1.0) {
        return Err(Error::PriceOutOfRange(mid));
    }
    if !(cash > 0.0 && cash.is_finite()) {
        return Err(Error::InvalidConfig(format!("cash must be positive, got {cash}")));
    }
    let r = ((1.0 - mid) / mid).sqrt();
    Payoff::new(vec![cash * r, cash / r])
}

/// A two-outcome StableSwap maker `w log a + (1-w) log b + λ log(w a + (1-w) b)`,
/// evaluated without allocation. `λ = 0` is the log maker.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TwoAtom {
    pub w: f64,
    pub lambda: f64,
}

impl TwoAtom {
    /// Fast path for `spec`, when one exists.
    pub fn for_spec(spec: &UtilitySpec, space: &OutcomeSpace) -> Option<Self> {
        if space.len() != 2 {
            return None;
        }
        let w = space.weights()[0];
        match spec {
            UtilitySpec::Log => Some(Self { w, lambda: 0.0 }),
            UtilitySpec::StableSwap { lambda } => Some(Self { w, lambda: *lambda }),
            UtilitySpec::EssInfMix { base, .. } if spec.mix_weight(space) == 0.0 => Self::for_spec(base, space),
            _ => None,
        }
    }

    pub fn level(&self, a: f64, b: f64) -> f64 {
        let w = self.w;
        let base = w * a.ln() + (1.0 - w) * b.ln();
        if self.lambda == 0.0 {
            base
        } else {
            base + self.lambda * (w * a + (1.0 - w) * b).ln()
        }
    }

    /// Marginal price of team A.
    pub fn price_a(&self, a: f64, b: f64) -> f64 {
        let w = self.w;
        let extra = self.lambda / (w * a + (1.0 - w) * b);
        let ga = w * (1.0 / a + extra);
        let gb = (1.0 - w) * (1.0 / b + extra);
        ga / (ga + gb)
    }

    /// Liquidity on the level set through `(a, b)` at which team A is
    /// priced at `target`.
    pub fn move_to(&self, a: f64, b: f64, target: f64) -> (f64, f64) {
        let w = self.w;
        let lam = self.lambda;
        // shape (r, 1): R w r² - (w + λ - R(1 - w + λ)) r - (1 - w) = 0
        let big_r = target * (1.0 - w) / ((1.0 - target) * w);
        let qa = big_r * w;
        let qb = w + lam - big_r * (1.0 - w + lam);
        let qc = 1.0 - w;
        let disc = (qb * qb + 4.0 * qa * qc).sqrt();
        let r = if qb >= 0.0 {
            (qb + disc) / (2.0 * qa)
        } else {
            2.0 * qc / (disc - qb)
        };
        let k = ((self.level(a, b) - self.level(r, 1.0)) / (1.0 + lam)).exp();
        (k * r, k)
    }
}

/// Liquidity on the level set through `pi` at which the price of outcome
/// 0 of a two-outcome market is `target`.
pub fn two_outcome_target(spec: &UtilitySpec, space: &OutcomeSpace, pi: &Payoff, target: f64) -> Result<Payoff> {
    if space.len() != 2 {
        return Err(Error::InvalidSpace("expected two outcomes".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::PriceOutOfRange(target));
    }
    if let Some(fast) = TwoAtom::for_spec(spec, space) {
        let (a, b) = fast.move_to(pi[0], pi[1], target);
        return Payoff::new(vec![a, b]);
    }
    let w = space.weights();
    let q = [target / w[0], (1.0 - target) / w[1]];
    Payoff::new(target_liquidity(spec, space, pi, &q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MarketState;

    #[test]
    fn implied_liquidity_examples() {
        assert_eq!(implied_liquidity_log(100.0, 0.5).unwrap().values(), &[100.0, 100.0]);
        let pi = implied_liquidity_log(100.0, 0.8).unwrap();
        assert!((pi[0] - 50.0).abs() < 1e-12 && (pi[1] - 200.0).abs() < 1e-12);
        let m = MarketState::new(OutcomeSpace::uniform(2).unwrap(), UtilitySpec::Log, pi).unwrap();
        let q = m.pricing_measure().unwrap().probabilities(m.space());
        assert!((q[0] - 0.8).abs() < 1e-14);
        for mid in [0.01, 0.3, 0.77, 0.999] {
            let pi = implied_liquidity_log(7.0, mid).unwrap();
            assert!((pi[0] * pi[1] - 49.0).abs() < 1e-12);
        }
        assert!(implied_liquidity_log(1.0, 1.0).is_err());
    }

    #[test]
    fn fast_path_matches_generic_solution() {
        let space = OutcomeSpace::new(vec!["A".into(), "B".into()], vec![0.35, 0.65]).unwrap();
        let pi = Payoff::new(vec![80.0, 130.0]).unwrap();
        for spec in [UtilitySpec::Log, UtilitySpec::stable_swap(2.0), UtilitySpec::stable_swap(0.3)] {
            for target in [0.05, 0.35, 0.5, 0.9] {
                let fast = two_outcome_target(&spec, &space, &pi, target).unwrap();
                let w = space.weights();
                let q = [target / w[0], (1.0 - target) / w[1]];
                let slow = target_liquidity(&spec, &space, &pi, &q).unwrap();
                for i in 0..2 {
                    assert!((fast[i] - slow[i]).abs() < 1e-9 * slow[i], "{spec} {target}: {fast:?} {slow:?}");
                }
                let m = MarketState::new(space.clone(), spec.clone(), fast).unwrap();
                let p = m.pricing_measure().unwrap().probabilities(&space)[0];
                assert!((p - target).abs() < 1e-12);
                let before = MarketState::new(space.clone(), spec.clone(), pi.clone()).unwrap();
                assert!((m.utility_level() - before.utility_level()).abs() < 1e-12);
            }
        }
    }
}
