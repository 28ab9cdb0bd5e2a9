//! The link between class probabilities and canonical density ratios.
//!
//! With pivot `k` and priors `π`, the forward link maps a class-probability
//! vector `η` to `r_i = (π_k / π_i) (η_i / η_k)` for `i < k`, and the inverse
//! maps `r` (with `r_k = 1`) back to `η_i = π_i r_i / Σ_j π_j r_j`.

use serde::{Deserialize, Serialize};

use crate::data::{Prior, SIMPLEX_TOL};
use crate::error::{DreError, Result};

/// Canonical ratio vector `(r_1, ..., r_{k-1})`; the pivot entry `r_k = 1` is
/// implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioVector(Vec<f64>);

impl RatioVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DreError::InvalidRatio("empty ratio vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(DreError::InvalidRatio(format!("entry {v} is not finite and positive")));
        }
        Ok(Self(values))
    }

    /// Build from values already known to be finite and positive.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
        Self(values)
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
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

    /// Number of distributions this vector describes (`len + 1`).
    pub fn k(&self) -> usize {
        self.0.len() + 1
    }

    /// Entry `i` of the full vector, with the pivot entry equal to one.
    pub fn full(&self, i: usize) -> f64 {
        if i == self.0.len() {
            1.0
        } else {
            self.0[i]
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A point of the k-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(DreError::InvalidProbability(format!("need k >= 2 entries, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(DreError::InvalidProbability(format!("entry {v} is negative or non-finite")));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(DreError::InvalidProbability(format!("entries sum to {s}, not 1")));
        }
        Ok(Self(values))
    }

    /// Normalize nonnegative weights onto the simplex.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(DreError::InvalidProbability(format!("cannot normalize weights with sum {s}")));
        }
        Self::new(weights.iter().map(|w| w / s).collect())
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

fn check_k(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(DreError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Class probabilities to canonical ratios. Any zero entry is an error.
pub fn link_forward(eta: &ProbabilityVector, prior: &Prior) -> Result<RatioVector> {
    let raw = link_forward_raw(eta, prior)?;
    if let Some(index) = raw.iter().position(|&r| r == 0.0) {
        return Err(DreError::ZeroRatio { index });
    }
    Ok(RatioVector::from_trusted(raw))
}

/// Like [`link_forward`], but maps `η_i = 0` to `r_i = 0` instead of failing.
/// `η_k = 0` is still an error.
pub fn link_forward_allow_zero(eta: &ProbabilityVector, prior: &Prior) -> Result<Vec<f64>> {
    link_forward_raw(eta, prior)
}

fn link_forward_raw(eta: &ProbabilityVector, prior: &Prior) -> Result<Vec<f64>> {
    check_k(prior.k(), eta.k())?;
    let k = eta.k();
    let eta_k = eta.get(k - 1);
    if eta_k == 0.0 {
        return Err(DreError::DivisionByZero("pivot class probability is zero".into()));
    }
    let pi_k = prior.pivot();
    Ok((0..k - 1).map(|i| (pi_k / prior.get(i)) * (eta.get(i) / eta_k)).collect())
}

/// Canonical ratios to class probabilities. Always lands on the simplex.
pub fn link_inverse(r: &RatioVector, prior: &Prior) -> Result<ProbabilityVector> {
    check_k(prior.k(), r.k())?;
    let log_r: Vec<f64> = r.values().iter().map(|v| v.ln()).collect();
    Ok(ProbabilityVector::from_trusted(
        link_inverse_log(&log_r, prior).into_iter().map(f64::exp).collect(),
    ))
}

/// `log η` from `log r`, computed with a max shift so huge or tiny ratios do
/// not overflow.
pub fn link_inverse_log(log_r: &[f64], prior: &Prior) -> Vec<f64> {
    let k = log_r.len() + 1;
    let mut a: Vec<f64> = (0..k)
        .map(|i| prior.get(i).ln() + if i < k - 1 { log_r[i] } else { 0.0 })
        .collect();
    let lse = log_sum_exp(&a);
    for v in &mut a {
        *v -= lse;
    }
    a
}

pub(crate) fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
