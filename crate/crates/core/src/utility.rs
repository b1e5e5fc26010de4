//! Market-maker utility functions over remaining liquidity.
//!
//! Log, StableSwap and the essinf-mix are liquidity-based: they are defined
//! on strictly positive liquidity vectors and return `-inf` elsewhere.
//! Hanson's exponential utility is kept as a reference design; its cost has
//! a closed form and is evaluated separately.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{OutcomeSpace, Payoff};

/// Relative width within which two liquidity values count as a tie for the
/// essential infimum.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `E[log Π]`
    Log,
    /// `E[log Π] + λ log E[Π]`
    StableSwap { lambda: f64 },
    /// `(1-m) u(Π) + m log(essinf Π)` with `m = (ε - min atom weight)⁺`
    EssInfMix {
        base: Box<UtilitySpec>,
        epsilon: f64,
    },
    /// `log E[1 - exp(-γ Π)]`
    Hanson {
        #[serde(alias = "gamma")]
        risk_aversion: f64,
    },
}

/// Result of [`utility_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub enum Gradient {
    /// `∂u/∂Π_i` divided by the weight of atom `i`.
    Density(Payoff),
    NotDifferentiable,
}

impl UtilitySpec {
    pub fn stable_swap(lambda: f64) -> Self {
        UtilitySpec::StableSwap { lambda }
    }

    pub fn ess_inf_mix(base: UtilitySpec, epsilon: f64) -> Self {
        UtilitySpec::EssInfMix {
            base: Box::new(base),
            epsilon,
        }
    }

    pub fn hanson(risk_aversion: f64) -> Self {
        UtilitySpec::Hanson { risk_aversion }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::Log => Ok(()),
            UtilitySpec::StableSwap { lambda } => {
                if lambda.is_finite() && *lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidUtility(format!("lambda must be >= 0, got {lambda}")))
                }
            }
            UtilitySpec::EssInfMix { base, epsilon } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(Error::InvalidUtility(format!(
                        "epsilon must lie in (0, 1), got {epsilon}"
                    )));
                }
                match base.as_ref() {
                    UtilitySpec::Log | UtilitySpec::StableSwap { .. } => base.validate(),
                    other => Err(Error::InvalidUtility(format!(
                        "essinf-mix base must be log or stableswap, got {other}"
                    ))),
                }
            }
            UtilitySpec::Hanson { risk_aversion } => {
                if risk_aversion.is_finite() && *risk_aversion > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidUtility(format!(
                        "risk aversion must be > 0, got {risk_aversion}"
                    )))
                }
            }
        }
    }

    /// Whether the utility depends on remaining liquidity only (everything
    /// but Hanson).
    pub fn is_liquidity_based(&self) -> bool {
        !matches!(self, UtilitySpec::Hanson { .. })
    }

    /// Weight on the `log essinf` term for this space.
    pub fn mix_weight(&self, space: &OutcomeSpace) -> f64 {
        match self {
            UtilitySpec::EssInfMix { epsilon, .. } => (epsilon - space.min_weight()).max(0.0),
            _ => 0.0,
        }
    }

    /// The coefficient `A` with `u(kΠ) = A log k + u(Π)` for every `k > 0`.
    /// `None` for Hanson, which is not homothetic.
    pub fn log_homogeneity(&self, space: &OutcomeSpace) -> Option<f64> {
        match self {
            UtilitySpec::Log => Some(1.0),
            UtilitySpec::StableSwap { lambda } => Some(1.0 + lambda),
            UtilitySpec::EssInfMix { base, .. } => {
                let m = self.mix_weight(space);
                base.log_homogeneity(space).map(|a| (1.0 - m) * a + m)
            }
            UtilitySpec::Hanson { .. } => None,
        }
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilitySpec::Log => write!(f, "log"),
            UtilitySpec::StableSwap { lambda } => write!(f, "stableswap:lambda={lambda}"),
            UtilitySpec::EssInfMix { base, epsilon } => match base.as_ref() {
                UtilitySpec::StableSwap { lambda } => {
                    write!(f, "essinf:eps={epsilon},base=stableswap,lambda={lambda}")
                }
                _ => write!(f, "essinf:eps={epsilon},base=log"),
            },
            UtilitySpec::Hanson { risk_aversion } => write!(f, "hanson:gamma={risk_aversion}"),
        }
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;

    /// Accepts either a JSON object (`{"kind": "stable_swap", "lambda": 2}`)
    /// or the compact forms `log`, `stableswap:lambda=2`,
    /// `essinf:eps=1e-6,base=log` and `hanson:gamma=0.7`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if s.starts_with('{') {
            serde_json::from_str(s).map_err(|e| Error::InvalidUtility(e.to_string()))?
        } else {
            let (kind, params) = s.split_once(':').unwrap_or((s, ""));
            let mut lambda = None;
            let mut eps = None;
            let mut gamma = None;
            let mut base = None;
            for kv in params.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidUtility(format!("expected key=value, got {kv:?}")))?;
                let num = || {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidUtility(format!("bad number {v:?} for {k}")))
                };
                match k.trim() {
                    "lambda" => lambda = Some(num()?),
                    "eps" | "epsilon" => eps = Some(num()?),
                    "gamma" | "risk_aversion" => gamma = Some(num()?),
                    "base" => base = Some(v.trim().to_ascii_lowercase()),
                    other => {
                        return Err(Error::InvalidUtility(format!("unknown parameter {other:?}")))
                    }
                }
            }
            match kind.trim().to_ascii_lowercase().as_str() {
                "log" => UtilitySpec::Log,
                "stableswap" | "stable_swap" => UtilitySpec::StableSwap {
                    lambda: lambda.unwrap_or(2.0),
                },
                "essinf" | "ess_inf_mix" | "essinfmix" => {
                    let base_spec = match base.as_deref() {
                        None | Some("log") => UtilitySpec::Log,
                        Some("stableswap") | Some("stable_swap") => UtilitySpec::StableSwap {
                            lambda: lambda.unwrap_or(2.0),
                        },
                        Some(b) => {
                            return Err(Error::InvalidUtility(format!("unknown base {b:?}")))
                        }
                    };
                    UtilitySpec::ess_inf_mix(base_spec, eps.unwrap_or(1e-6))
                }
                "hanson" => UtilitySpec::Hanson {
                    risk_aversion: gamma
                        .ok_or_else(|| Error::InvalidUtility("hanson needs gamma=...".into()))?,
                },
                other => return Err(Error::InvalidUtility(format!("unknown utility {other:?}"))),
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn weighted_log_mean(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, v) in weights.iter().zip(values) {
        if *v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += w * v.ln();
    }
    acc
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `u(Π)` with `-inf` outside the domain.
pub fn utility_eval(spec: &UtilitySpec, space: &OutcomeSpace, liquidity: &Payoff) -> f64 {
    eval_raw(spec, space, liquidity.values())
}

pub(crate) fn eval_raw(spec: &UtilitySpec, space: &OutcomeSpace, values: &[f64]) -> f64 {
    let w = space.weights();
    match spec {
        UtilitySpec::Log => weighted_log_mean(w, values),
        UtilitySpec::StableSwap { lambda } => {
            let base = weighted_log_mean(w, values);
            if base == f64::NEG_INFINITY {
                return base;
            }
            if *lambda == 0.0 {
                return base;
            }
            base + lambda * space.mean(values).ln()
        }
        UtilitySpec::EssInfMix { base, .. } => {
            let m = spec.mix_weight(space);
            let b = eval_raw(base, space, values);
            if m == 0.0 || b == f64::NEG_INFINITY {
                return b;
            }
            (1.0 - m) * b + m * min_of(values).ln()
        }
        UtilitySpec::Hanson { risk_aversion } => {
            let g = *risk_aversion;
            let e: f64 = w
                .iter()
                .zip(values)
                .map(|(wi, v)| wi * (-(-g * v).exp_m1()))
                .sum();
            if e > 0.0 {
                e.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// `u(base + delta) - u(base)` evaluated without forming both utilities,
/// so that small changes keep full relative precision. `base` must lie in
/// the domain.
pub(crate) fn utility_delta(spec: &UtilitySpec, space: &OutcomeSpace, base: &[f64], delta: &[f64]) -> f64 {
    let w = space.weights();
    match spec {
        UtilitySpec::Log => log_delta(w, base, delta),
        UtilitySpec::StableSwap { lambda } => {
            let d = log_delta(w, base, delta);
            if d == f64::NEG_INFINITY || *lambda == 0.0 {
                return d;
            }
            let mean_base = space.mean(base);
            let mean_delta = space.mean(delta);
            d + lambda * (mean_delta / mean_base).ln_1p()
        }
        UtilitySpec::EssInfMix { base: inner, .. } => {
            let m = spec.mix_weight(space);
            let d = utility_delta(inner, space, base, delta);
            if m == 0.0 || d == f64::NEG_INFINITY {
                return d;
            }
            let old_min = min_of(base);
            let new_min = base
                .iter()
                .zip(delta)
                .map(|(b, d)| b + d)
                .fold(f64::INFINITY, f64::min);
            (1.0 - m) * d + m * (new_min / old_min).ln()
        }
        UtilitySpec::Hanson { .. } => {
            let shifted: Vec<f64> = base.iter().zip(delta).map(|(b, d)| b + d).collect();
            eval_raw(spec, space, &shifted) - eval_raw(spec, space, base)
        }
    }
}

fn log_delta(w: &[f64], base: &[f64], delta: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((wi, b), d) in w.iter().zip(base).zip(delta) {
        let r = d / b;
        if r <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += wi * r.ln_1p();
    }
    acc
}

/// Density-form gradient of `u` at `Π`.
///
/// The essinf-mix is differentiable on a finite space exactly when its
/// minimum liquidity is attained at a single atom; a tie makes the one-sided
/// derivatives differ and yields [`Gradient::NotDifferentiable`].
pub fn utility_gradient(spec: &UtilitySpec, space: &OutcomeSpace, liquidity: &Payoff) -> Result<Gradient> {
    space.check(liquidity)?;
    let lo = liquidity.ess_inf();
    if !(lo > 0.0) {
        return Err(Error::Domain(lo));
    }
    let mut out = vec![0.0; space.len()];
    if gradient_into(spec, space, liquidity.values(), &mut out, false) {
        Ok(Gradient::Density(Payoff::from_vec_unchecked(out)))
    } else {
        Ok(Gradient::NotDifferentiable)
    }
}

/// Element of the superdifferential of `u` at `Π` in density form. Equals
/// the gradient wherever that exists; at an essinf tie the kink mass is
/// split across the tied atoms in proportion to their weights.
pub fn supergradient(spec: &UtilitySpec, space: &OutcomeSpace, liquidity: &Payoff) -> Result<Payoff> {
    space.check(liquidity)?;
    if !spec.is_liquidity_based() {
        return Err(Error::Unsupported("supergradient of a Hanson utility".into()));
    }
    let lo = liquidity.ess_inf();
    if !(lo > 0.0) {
        return Err(Error::Domain(lo));
    }
    let mut out = vec![0.0; space.len()];
    gradient_into(spec, space, liquidity.values(), &mut out, true);
    Ok(Payoff::from_vec_unchecked(out))
}

/// Writes the density-form (super)gradient into `out`; returns `false` when
/// `u` is not differentiable and `select` is off. Values must be positive.
pub(crate) fn gradient_into(
    spec: &UtilitySpec,
    space: &OutcomeSpace,
    values: &[f64],
    out: &mut [f64],
    select: bool,
) -> bool {
    match spec {
        UtilitySpec::Log => {
            for (o, v) in out.iter_mut().zip(values) {
                *o = 1.0 / v;
            }
            true
        }
        UtilitySpec::StableSwap { lambda } => {
            let extra = lambda / space.mean(values);
            for (o, v) in out.iter_mut().zip(values) {
                *o = 1.0 / v + extra;
            }
            true
        }
        UtilitySpec::EssInfMix { base, .. } => {
            let m = spec.mix_weight(space);
            gradient_into(base, space, values, out, select);
            if m == 0.0 {
                return true;
            }
            let lo = min_of(values);
            let cutoff = lo * (1.0 + TIE_RTOL);
            let mut tied_weight = 0.0;
            let mut tied = 0usize;
            for (w, v) in space.weights().iter().zip(values) {
                if *v <= cutoff {
                    tied_weight += w;
                    tied += 1;
                }
            }
            if tied > 1 && !select {
                return false;
            }
            let kink = m / (tied_weight * lo);
            for (o, v) in out.iter_mut().zip(values) {
                *o *= 1.0 - m;
                if *v <= cutoff {
                    *o += kink;
                }
            }
            true
        }
        UtilitySpec::Hanson { .. } => false,
    }
}

/// Weighted log-sum-exp `log Σ w_i exp(a_i)`.
pub(crate) fn log_sum_exp(weights: &[f64], a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = weights.iter().zip(a).map(|(w, v)| w * (v - m).exp()).sum();
    m + s.ln()
}

/// Hanson's closed-form cost `(1/γ) log(E[e^{γ(π+x)}] / E[e^{γπ}])` for
/// outstanding payouts `π`. Independent of the cash reserves.
pub fn hanson_cost(space: &OutcomeSpace, risk_aversion: f64, payouts: &Payoff, x: &Payoff) -> Result<f64> {
    if !(risk_aversion > 0.0 && risk_aversion.is_finite()) {
        return Err(Error::InvalidUtility(format!(
            "risk aversion must be > 0, got {risk_aversion}"
        )));
    }
    space.check(payouts)?;
    space.check(x)?;
    if x.is_constant() {
        return Ok(x[0]);
    }
    let g = risk_aversion;
    let a: Vec<f64> = payouts.values().iter().zip(x.values()).map(|(p, v)| g * (p + v)).collect();
    let b: Vec<f64> = payouts.values().iter().map(|p| g * p).collect();
    let w = space.weights();
    Ok((log_sum_exp(w, &a) - log_sum_exp(w, &b)) / g)
}

/// Hanson's pricing density `e^{γπ} / E[e^{γπ}]`.
pub fn hanson_density(space: &OutcomeSpace, risk_aversion: f64, payouts: &Payoff) -> Vec<f64> {
    let m = payouts.ess_sup();
    let raw: Vec<f64> = payouts.values().iter().map(|p| (risk_aversion * (p - m)).exp()).collect();
    let total = space.mean(&raw);
    raw.into_iter().map(|v| v / total).collect()
}

/// Whether Hanson's maker with risk aversion `γ` and initial cash `L0` on
/// `n` outcomes can cover every bet from the start: `γ ≥ log(n)/L0`.
pub fn hanson_liquidity_check(risk_aversion: f64, initial_cash: f64, n: usize) -> bool {
    risk_aversion >= (n as f64).ln() / initial_cash
}
