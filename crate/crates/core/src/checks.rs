//! Randomized verification of the cost function's structural properties.
//!
//! Each instance draws a liquidity-based utility, a reference measure on
//! 2 to 50 atoms, a liquidity vector and a pair of bets, then checks
//! no-arbitrage bounds, indifference, path independence, translativity,
//! the Lipschitz bound, convexity, monotonicity and the pricing sandwich.
//! The sandwich compares a pricing measure built from the gradient with
//! bid and ask obtained from difference quotients of the cost.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::MarketState;
use crate::error::Result;
use crate::measure::{OutcomeSpace, Payoff};
use crate::utility::{utility_eval, UtilitySpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub instances: usize,
    pub checks: usize,
    pub violations: Vec<String>,
    pub kinked_instances: usize,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_utility(rng: &mut ChaCha8Rng, min_weight: f64) -> UtilitySpec {
    match rng.random_range(0..4) {
        0 => UtilitySpec::Log,
        1 => UtilitySpec::stable_swap(rng.random_range(0.0..5.0)),
        k => {
            let base = if k == 2 {
                UtilitySpec::Log
            } else {
                UtilitySpec::stable_swap(rng.random_range(0.0..3.0))
            };
            // mostly active mixes, sometimes inert ones
            let eps = if rng.random_bool(0.8) {
                (min_weight + rng.random_range(0.01..0.6)).min(0.95)
            } else {
                min_weight * rng.random_range(0.1..1.0)
            };
            UtilitySpec::ess_inf_mix(base, eps)
        }
    }
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> Result<OutcomeSpace> {
    if rng.random_bool(0.3) {
        return OutcomeSpace::uniform(n);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    OutcomeSpace::new((0..n).map(|i| format!("w{i}")).collect(), w)
}

fn random_liquidity(rng: &mut ChaCha8Rng, n: usize) -> Payoff {
    let mut v: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(0.0..3.0))).collect();
    if rng.random_bool(0.3) {
        // tie the minimum so that essinf-mix utilities sit on a kink
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let i = rng.random_range(0..n);
        v[i] = lo;
        if n > 2 {
            let j = (i + 1 + rng.random_range(0..n - 1)) % n;
            v[j] = lo;
        }
    }
    Payoff::new(v).expect("finite")
}

fn random_bet(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Payoff {
    Payoff::new((0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).expect("finite")
}

struct Checker {
    checks: usize,
    violations: Vec<String>,
}

impl Checker {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(what());
        }
    }
}

/// Runs `instances` random instances from `seed`.
pub fn run_theorem_suite(instances: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Checker {
        checks: 0,
        violations: Vec::new(),
    };
    let mut kinked = 0;
    for k in 0..instances {
        let n = rng.random_range(2..=50);
        let space = match random_space(&mut rng, n) {
            Ok(s) => s,
            Err(e) => {
                c.check(false, || format!("#{k}: space construction failed: {e}"));
                continue;
            }
        };
        let spec = random_utility(&mut rng, space.min_weight());
        let pi = random_liquidity(&mut rng, n);
        let scale = pi.ess_inf() * [0.01, 0.1, 0.5, 1.0][rng.random_range(0..4)];
        let x = random_bet(&mut rng, n, scale);
        let y = random_bet(&mut rng, n, scale);
        match instance(&mut c, k, &space, &spec, &pi, &x, &y, &mut rng) {
            Ok(true) => kinked += 1,
            Ok(false) => {}
            Err(e) => c.check(false, || format!("#{k} {spec}: solver error {e}")),
        }
    }
    SuiteReport {
        instances,
        checks: c.checks,
        violations: c.violations,
        kinked_instances: kinked,
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[allow(clippy::too_many_arguments)]
fn instance(
    c: &mut Checker,
    k: usize,
    space: &OutcomeSpace,
    spec: &UtilitySpec,
    pi: &Payoff,
    x: &Payoff,
    y: &Payoff,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let m = MarketState::new(space.clone(), spec.clone(), pi.clone())?;
    let tag = |what: &str| format!("#{k} {spec} n={}: {what}", space.len());
    let size = x.sup_norm().max(y.sup_norm()).max(1.0);
    let tol = 1e-9 * size;

    // no arbitrage
    let cx = m.cost(x)?;
    c.check(x.ess_inf() < cx && cx < x.ess_sup(), || {
        tag(&format!("cost {cx} outside ({}, {})", x.ess_inf(), x.ess_sup()))
    });
    let cc = m.cost(&Payoff::constant(space.len(), x[0]))?;
    c.check(cc == x[0], || tag("constant bet not priced at its value"));

    // indifference, judged on directly evaluated utilities
    let after = pi.sub(x).shift(cx);
    let u0 = utility_eval(spec, space, pi);
    let u1 = utility_eval(spec, space, &after);
    c.check((u1 - u0).abs() <= 1e-9 * u0.abs().max(1.0), || {
        tag(&format!("indifference residual {}", u1 - u0))
    });
    c.check(after.ess_inf() > 0.0, || tag("post-trade liquidity not positive"));

    // path independence
    let next = m.with_liquidity(after)?;
    let cy_after = next.cost(y)?;
    let cxy = m.cost(&x.add(y))?;
    c.check((cxy - (cx + cy_after)).abs() <= tol, || {
        tag(&format!("path independence gap {}", cxy - cx - cy_after))
    });

    // translativity
    let shift = size * rng.random_range(-1.0..1.0);
    let cshift = m.cost(&x.shift(shift))?;
    c.check((cshift - (cx + shift)).abs() <= tol, || {
        tag(&format!("translativity gap {}", cshift - cx - shift))
    });

    // Lipschitz and convexity
    let cy = m.cost(y)?;
    let dist = x.sub(y).sup_norm();
    c.check((cx - cy).abs() <= dist + tol, || tag("Lipschitz bound violated"));
    let t = rng.random_range(0.0..1.0);
    let cmix = m.cost(&x.lerp(y, t))?;
    c.check(cmix <= t * cx + (1.0 - t) * cy + tol, || {
        tag(&format!("convexity gap {}", cmix - t * cx - (1.0 - t) * cy))
    });

    // strict monotonicity
    let bump: Vec<f64> = (0..space.len())
        .map(|_| if rng.random_bool(0.5) { size * rng.random_range(0.01..0.5) } else { 0.0 })
        .collect();
    if bump.iter().any(|b| *b > 0.0) {
        let cb = m.cost(&x.add(&Payoff::new(bump)?))?;
        c.check(cb > cx, || tag("cost not strictly increasing"));
    }

    // sandwich: gradient-side measure against cost-side oracles
    let q = m.selected_measure()?;
    let kinked = m.pricing_measure().is_none();
    for bet in [x, y] {
        let e = space.expect(bet, Some(&q))?;
        let ask = m.numeric_ask(bet)?;
        let bid = -m.numeric_ask(&bet.scale(-1.0))?;
        let qtol = 1e-8 * bet.sup_norm().max(1e-300);
        c.check(bid <= e + qtol && e <= ask + qtol, || {
            tag(&format!("sandwich bid {bid} E^Q {e} ask {ask}"))
        });
        let quote = m.quote(bet)?;
        c.check(quote.bid <= quote.ask, || tag("bid above ask"));
    }
    Ok(kinked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let r = run_theorem_suite(60, 3);
        assert!(r.passed(), "{:#?}", r.violations);
        assert!(r.checks > 60 * 10);
    }
}
