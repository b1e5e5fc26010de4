//! Finite outcome spaces and the random variables living on them.
//!
//! Every market in this crate is defined over a finite set of atoms with
//! strictly positive probability weights. Continuous outcome spaces (the
//! derivatives market) are handled by discretizing onto a grid first.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHT_SUM_TOL: f64 = 1e-12;
pub const DENSITY_NORM_TOL: f64 = 1e-10;

/// Atoms with their probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    labels: Arc<[String]>,
    weights: Vec<f64>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("no atoms".into()));
        }
        if labels.len() != weights.len() {
            return Err(Error::InvalidSpace(format!(
                "{} labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate atom label {l:?}")));
            }
        }
        Self::check_weights(&weights)?;
        Ok(Self {
            labels: labels.into(),
            weights,
        })
    }

    /// `n` equally likely atoms labelled `w0, w1, ...`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace("no atoms".into()));
        }
        let labels = (0..n).map(|i| format!("w{i}")).collect();
        Self::new(labels, vec![1.0 / n as f64; n])
    }

    /// Same atoms, new probability weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::SpaceMismatch {
                expected: self.len(),
                got: weights.len(),
            });
        }
        Self::check_weights(&weights)?;
        Ok(Self {
            labels: Arc::clone(&self.labels),
            weights,
        })
    }

    fn check_weights(weights: &[f64]) -> Result<()> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "weight {w} at atom {i} is not strictly positive"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidSpace(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check(&self, x: &Payoff) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::SpaceMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `E[x · density]` under the space weights. `density` defaults to 1.
    pub fn expect(&self, x: &Payoff, density: Option<&DensityVector>) -> Result<f64> {
        self.check(x)?;
        match density {
            None => Ok(self.mean(x.values())),
            Some(d) => {
                if d.len() != self.len() {
                    return Err(Error::SpaceMismatch {
                        expected: self.len(),
                        got: d.len(),
                    });
                }
                Ok(self
                    .weights
                    .iter()
                    .zip(d.values())
                    .zip(x.values())
                    .map(|((w, q), v)| w * q * v)
                    .sum())
            }
        }
    }

    /// Unchecked weighted mean of a raw slice.
    pub(crate) fn mean(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// A bounded random variable on a finite outcome space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Payoff(Vec<f64>);

impl Payoff {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    /// Pays 1 on atom `i`, 0 elsewhere.
    pub fn indicator(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every atom carries positive weight, so the essential infimum is the minimum.
    pub fn ess_inf(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ess_sup(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_constant(&self) -> bool {
        self.ess_inf() == self.ess_sup()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.0.iter().all(|&v| v <= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// `self + c·1`.
    pub fn shift(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.iter().map(|v| v * k).collect())
    }

    pub fn add(&self, other: &Payoff) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Payoff) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `t·self + (1-t)·other`.
    pub fn lerp(&self, other: &Payoff, t: f64) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for Payoff {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Radon–Nikodym derivative `dQ/dP` of a probability measure with respect
/// to the space weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    pub fn new(space: &OutcomeSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::SpaceMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDensity(format!("entry {v} is not a finite nonnegative number")));
        }
        let total = space.mean(&values);
        if (total - 1.0).abs() > DENSITY_NORM_TOL {
            return Err(Error::InvalidDensity(format!("expectation is {total}, not 1")));
        }
        Ok(Self(values))
    }

    /// Rescales nonnegative `raw` so that its expectation is one.
    pub fn normalized(space: &OutcomeSpace, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != space.len() {
            return Err(Error::SpaceMismatch {
                expected: space.len(),
                got: raw.len(),
            });
        }
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDensity("entries must be finite and nonnegative".into()));
        }
        let total = space.mean(&raw);
        if !(total > 0.0) {
            return Err(Error::InvalidDensity("density has zero mass".into()));
        }
        Ok(Self(raw.into_iter().map(|v| v / total).collect()))
    }

    /// The physical measure itself.
    pub fn ones(space: &OutcomeSpace) -> Self {
        Self(vec![1.0; space.len()])
    }

    /// Density of the probability vector `probs` (which must sum to one).
    pub fn from_probabilities(space: &OutcomeSpace, probs: &[f64]) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::SpaceMismatch {
                expected: space.len(),
                got: probs.len(),
            });
        }
        let raw = probs.iter().zip(space.weights()).map(|(p, w)| p / w).collect();
        Self::new(space, raw)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    /// Probability mass per atom, `Q(ω_i) = w_i · q_i`.
    pub fn probabilities(&self, space: &OutcomeSpace) -> Vec<f64> {
        self.0.iter().zip(space.weights()).map(|(q, w)| q * w).collect()
    }
}

impl std::ops::Index<usize> for DensityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn ess_inf(x: &Payoff) -> f64 {
    x.ess_inf()
}

pub fn ess_sup(x: &Payoff) -> f64 {
    x.ess_sup()
}

pub fn expect(space: &OutcomeSpace, x: &Payoff, density: Option<&DensityVector>) -> Result<f64> {
    space.expect(x, density)
}
