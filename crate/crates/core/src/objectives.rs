//! Convex functions on the positive orthant and the Bregman density-ratio loss
//! they induce.
//!
//! For a strictly convex `f: R_+^{k-1} -> R`, the expected Bregman divergence
//! between true ratios `r` and a model `r̂`, up to a constant, is
//!
//! ```text
//! L(r̂) = E_{p_k}[ <∇f(r̂), r̂> - f(r̂) ] - Σ_{i<k} E_{p_i}[ ∂_i f(r̂) ]
//! ```
//!
//! Each expectation is a per-group sample mean. Parameter gradients chain the
//! per-sample derivatives `∇²f(r̂)·r̂` (pivot group) and `-∇²f(r̂)[i, :]`
//! (group `i`) through the model's vector-Jacobian product.
//!
//! | kind | f(r) |
//! |------|------|
//! | MultiLR | Σ_{i≤k} π_i r_i log(π_i r_i / Σ_j π_j r_j), with r_k = 1 |
//! | LSIF | ½‖r − 1‖² |
//! | KLIEP | Σ r_i log r_i − r_i |
//! | Power(α) | Σ r_i^α, α > 1 |
//! | Quadratic(H, q) | rᵀHr + qᵀr, H ≻ 0 |
//! | LogSumExp(α) | α log Σ exp(r_i / α), α > 0 |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, Minibatch, Prior};
use crate::diagnostics::guarded_ln;
use crate::error::{DreError, Result};
use crate::link::RatioVector;
use crate::models::RatioModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    MultiLr { prior: Prior },
    Lsif,
    Kliep,
    Power { alpha: f64 },
    /// `h` is row-major `(k-1)×(k-1)`.
    Quadratic { h: Vec<f64>, q: Vec<f64> },
    LogSumExp { alpha: f64 },
}

/// Objective names as used in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveName {
    MultiLr,
    Lsif,
    Kliep,
    Power,
    Quadratic,
    LogSumExp,
}

impl ObjectiveName {
    pub const ALL: [ObjectiveName; 6] = [
        ObjectiveName::MultiLr,
        ObjectiveName::Lsif,
        ObjectiveName::Kliep,
        ObjectiveName::Power,
        ObjectiveName::Quadratic,
        ObjectiveName::LogSumExp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveName::MultiLr => "multilr",
            ObjectiveName::Lsif => "lsif",
            ObjectiveName::Kliep => "kliep",
            ObjectiveName::Power => "power",
            ObjectiveName::Quadratic => "quadratic",
            ObjectiveName::LogSumExp => "logsumexp",
        }
    }

    /// Default `α` for the kinds that take one.
    pub fn default_alpha(self) -> Option<f64> {
        match self {
            ObjectiveName::Power => Some(1.5),
            ObjectiveName::LogSumExp => Some(5.0),
            _ => None,
        }
    }
}

impl fmt::Display for ObjectiveName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveName {
    type Err = DreError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "multilr" | "lr" | "logistic" => ObjectiveName::MultiLr,
            "lsif" | "multilsif" => ObjectiveName::Lsif,
            "kliep" | "multikliep" => ObjectiveName::Kliep,
            "power" => ObjectiveName::Power,
            "quadratic" => ObjectiveName::Quadratic,
            "logsumexp" | "lse" => ObjectiveName::LogSumExp,
            other => return Err(DreError::InvalidParameter(format!("unknown objective {other:?}"))),
        })
    }
}

/// A convex function `f: R_+^{k-1} -> R` with value, gradient and Hessian.
///
/// When `normalized` is set, the object evaluates `f̃(r) = B_f(r, 1)`, which
/// vanishes at `r = 1` and differs from `f` by an affine function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexObjective {
    kind: ObjectiveKind,
    k: usize,
    #[serde(default)]
    normalized: bool,
}

impl ConvexObjective {
    fn build(kind: ObjectiveKind, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(DreError::InvalidParameter(format!("k must be >= 2, got {k}")));
        }
        let m = k - 1;
        match &kind {
            ObjectiveKind::MultiLr { prior } if prior.k() != k => {
                return Err(DreError::DimensionMismatch { expected: k, got: prior.k() })
            }
            ObjectiveKind::Power { alpha } if !(alpha.is_finite() && *alpha > 1.0) => {
                return Err(DreError::InvalidParameter(format!("power objective needs alpha > 1, got {alpha}")))
            }
            ObjectiveKind::LogSumExp { alpha } if !(alpha.is_finite() && *alpha > 0.0) => {
                return Err(DreError::InvalidParameter(format!(
                    "logsumexp objective needs alpha > 0, got {alpha}"
                )))
            }
            ObjectiveKind::Quadratic { h, q } => {
                if h.len() != m * m {
                    return Err(DreError::DimensionMismatch { expected: m * m, got: h.len() });
                }
                if q.len() != m {
                    return Err(DreError::DimensionMismatch { expected: m, got: q.len() });
                }
                check_positive_definite(h, m)?;
            }
            _ => {}
        }
        Ok(Self { kind, k, normalized: false })
    }

    /// Multi-class logistic regression with general priors.
    pub fn multi_lr(prior: Prior) -> Result<Self> {
        let k = prior.k();
        Self::build(ObjectiveKind::MultiLr { prior }, k)
    }

    pub fn multi_lr_uniform(k: usize) -> Result<Self> {
        Self::build(ObjectiveKind::MultiLr { prior: Prior::uniform(k) }, k)
    }

    pub fn lsif(k: usize) -> Result<Self> {
        Self::build(ObjectiveKind::Lsif, k)
    }

    pub fn kliep(k: usize) -> Result<Self> {
        Self::build(ObjectiveKind::Kliep, k)
    }

    pub fn power(k: usize, alpha: f64) -> Result<Self> {
        Self::build(ObjectiveKind::Power { alpha }, k)
    }

    /// `h` row-major `(k-1)×(k-1)`, symmetric positive definite.
    pub fn quadratic(h: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let k = q.len() + 1;
        Self::build(ObjectiveKind::Quadratic { h, q }, k)
    }

    /// The default quadratic: unit diagonal, 0.5 off the diagonal, `q = 0`.
    pub fn quadratic_default(k: usize) -> Result<Self> {
        let m = k.saturating_sub(1);
        let h = (0..m * m).map(|ij| if ij / m.max(1) == ij % m.max(1) { 1.0 } else { 0.5 }).collect();
        Self::build(ObjectiveKind::Quadratic { h, q: vec![0.0; m] }, k)
    }

    pub fn log_sum_exp(k: usize, alpha: f64) -> Result<Self> {
        Self::build(ObjectiveKind::LogSumExp { alpha }, k)
    }

    /// Build from a name. `alpha` falls back to the kind's default; MultiLR
    /// uses `prior` when given and the uniform prior otherwise.
    pub fn from_name(name: ObjectiveName, k: usize, alpha: Option<f64>, prior: Option<Prior>) -> Result<Self> {
        let alpha = alpha.or(name.default_alpha());
        match name {
            ObjectiveName::MultiLr => match prior {
                Some(p) => Self::multi_lr(p),
                None => Self::multi_lr_uniform(k),
            },
            ObjectiveName::Lsif => Self::lsif(k),
            ObjectiveName::Kliep => Self::kliep(k),
            ObjectiveName::Power => Self::power(k, alpha.unwrap_or(1.5)),
            ObjectiveName::Quadratic => Self::quadratic_default(k),
            ObjectiveName::LogSumExp => Self::log_sum_exp(k, alpha.unwrap_or(5.0)),
        }
    }

    /// `f̃(r) = B_f(r, 1)`.
    pub fn normalized(&self) -> Self {
        Self { normalized: true, ..self.clone() }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn name(&self) -> ObjectiveName {
        match self.kind {
            ObjectiveKind::MultiLr { .. } => ObjectiveName::MultiLr,
            ObjectiveKind::Lsif => ObjectiveName::Lsif,
            ObjectiveKind::Kliep => ObjectiveName::Kliep,
            ObjectiveKind::Power { .. } => ObjectiveName::Power,
            ObjectiveKind::Quadratic { .. } => ObjectiveName::Quadratic,
            ObjectiveKind::LogSumExp { .. } => ObjectiveName::LogSumExp,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Input dimension `k - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    fn raw_value(&self, r: &[f64]) -> f64 {
        match &self.kind {
            ObjectiveKind::MultiLr { prior } => {
                let m = r.len();
                let t: Vec<f64> = (0..=m).map(|i| prior.get(i) * if i < m { r[i] } else { 1.0 }).collect();
                let total: f64 = t.iter().sum();
                let log_total = guarded_ln(total);
                t.iter().map(|&ti| ti * (guarded_ln(ti) - log_total)).sum()
            }
            ObjectiveKind::Lsif => 0.5 * r.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>(),
            ObjectiveKind::Kliep => r.iter().map(|&v| v * guarded_ln(v) - v).sum(),
            ObjectiveKind::Power { alpha } => r.iter().map(|v| v.powf(*alpha)).sum(),
            ObjectiveKind::Quadratic { h, q } => quad_form(h, r, r) + dot(q, r),
            ObjectiveKind::LogSumExp { alpha } => {
                let scaled: Vec<f64> = r.iter().map(|v| v / alpha).collect();
                alpha * crate::link::log_sum_exp(&scaled)
            }
        }
    }

    fn raw_gradient(&self, r: &[f64]) -> Vec<f64> {
        match &self.kind {
            ObjectiveKind::MultiLr { prior } => {
                let m = r.len();
                let total: f64 = (0..m).map(|i| prior.get(i) * r[i]).sum::<f64>() + prior.pivot();
                let log_total = guarded_ln(total);
                (0..m).map(|i| prior.get(i) * (guarded_ln(prior.get(i) * r[i]) - log_total)).collect()
            }
            ObjectiveKind::Lsif => r.iter().map(|v| v - 1.0).collect(),
            ObjectiveKind::Kliep => r.iter().map(|&v| guarded_ln(v)).collect(),
            ObjectiveKind::Power { alpha } => r.iter().map(|v| alpha * v.powf(alpha - 1.0)).collect(),
            ObjectiveKind::Quadratic { h, q } => {
                let m = r.len();
                (0..m)
                    .map(|i| (0..m).map(|j| (h[i * m + j] + h[j * m + i]) * r[j]).sum::<f64>() + q[i])
                    .collect()
            }
            ObjectiveKind::LogSumExp { alpha } => softmax_scaled(r, *alpha),
        }
    }

    /// `f(r)` (or `f̃(r)` when normalized).
    pub fn value(&self, r: &[f64]) -> f64 {
        let v = self.raw_value(r);
        if !self.normalized {
            return v;
        }
        let one = vec![1.0; r.len()];
        let g1 = self.raw_gradient(&one);
        let lin: f64 = g1.iter().zip(r).map(|(g, x)| g * (x - 1.0)).sum();
        v - self.raw_value(&one) - lin
    }

    pub fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let mut g = self.raw_gradient(r);
        if self.normalized {
            let g1 = self.raw_gradient(&vec![1.0; r.len()]);
            for (a, b) in g.iter_mut().zip(g1) {
                *a -= b;
            }
        }
        g
    }

    /// Dense Hessian, row-major `(k-1)×(k-1)`.
    pub fn hessian(&self, r: &[f64]) -> Vec<f64> {
        let m = r.len();
        let mut out = vec![0.0; m * m];
        match &self.kind {
            ObjectiveKind::MultiLr { prior } => {
                let total: f64 = (0..m).map(|i| prior.get(i) * r[i]).sum::<f64>() + prior.pivot();
                for i in 0..m {
                    for j in 0..m {
                        out[i * m + j] = -prior.get(i) * prior.get(j) / total;
                    }
                    out[i * m + i] += prior.get(i) / r[i].max(crate::diagnostics::LOG_FLOOR);
                }
            }
            ObjectiveKind::Lsif => (0..m).for_each(|i| out[i * m + i] = 1.0),
            ObjectiveKind::Kliep => {
                (0..m).for_each(|i| out[i * m + i] = 1.0 / r[i].max(crate::diagnostics::LOG_FLOOR))
            }
            ObjectiveKind::Power { alpha } => {
                (0..m).for_each(|i| out[i * m + i] = alpha * (alpha - 1.0) * r[i].powf(alpha - 2.0))
            }
            ObjectiveKind::Quadratic { h, .. } => {
                for i in 0..m {
                    for j in 0..m {
                        out[i * m + j] = h[i * m + j] + h[j * m + i];
                    }
                }
            }
            ObjectiveKind::LogSumExp { alpha } => {
                let s = softmax_scaled(r, *alpha);
                for i in 0..m {
                    for j in 0..m {
                        out[i * m + j] = -s[i] * s[j] / alpha;
                    }
                    out[i * m + i] += s[i] / alpha;
                }
            }
        }
        out
    }

    /// `B_f(x, y) = f(x) - f(y) - <∇f(y), x - y>`, evaluated in a
    /// cancellation-aware form where one exists. Normalization does not change
    /// the divergence.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            ObjectiveKind::Lsif => 0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            ObjectiveKind::Quadratic { h, .. } => {
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                quad_form(h, &d, &d)
            }
            ObjectiveKind::Kliep => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| b * kliep_kernel(guarded_ln(a) - guarded_ln(b)))
                .sum(),
            ObjectiveKind::Power { alpha } => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let u = a.ln() - b.ln();
                    b.powf(*alpha) * (exp_remainder(alpha * u) - alpha * exp_remainder(u))
                })
                .sum(),
            ObjectiveKind::MultiLr { .. } | ObjectiveKind::LogSumExp { .. } => {
                let gy = self.raw_gradient(y);
                let lin: f64 = gy.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum();
                self.raw_value(x) - self.raw_value(y) - lin
            }
        }
    }

    /// Per-sample pivot term `<∇f(r), r> - f(r)`.
    pub fn pivot_term(&self, r: &[f64]) -> f64 {
        dot(&self.gradient(r), r) - self.value(r)
    }

    /// Per-sample term for group `i < k-1`: `-∂_i f(r)`.
    pub fn group_term(&self, i: usize, r: &[f64]) -> f64 {
        -self.gradient(r)[i]
    }

    fn check_ratio(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.dim() {
            return Err(DreError::DimensionMismatch { expected: self.dim(), got: r.len() });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(h: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    (0..m).map(|i| a[i] * (0..m).map(|j| h[i * m + j] * b[j]).sum::<f64>()).sum()
}

fn softmax_scaled(r: &[f64], alpha: f64) -> Vec<f64> {
    let mx = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|v| ((v - mx) / alpha).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `e^z - 1 - z` without cancellation near zero.
pub(crate) fn exp_remainder(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = z;
        let mut sum = 0.0;
        for n in 2..30 {
            term *= z / n as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        z.exp_m1() - z
    }
}

/// `e^u (u - 1) + 1 = Σ_{n≥2} (n-1) u^n / n!`, i.e. `t ln t - t + 1` at
/// `t = e^u`.
fn kliep_kernel(u: f64) -> f64 {
    if u.abs() < 0.5 {
        let mut pow_fact = u; // u^n / n!
        let mut sum = 0.0;
        for n in 2..30 {
            pow_fact *= u / n as f64;
            let term = (n - 1) as f64 * pow_fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        u.exp() * (u - 1.0) + 1.0
    }
}

/// Cholesky-style pivots of a symmetric matrix; all must be positive.
pub fn check_positive_definite(h: &[f64], m: usize) -> Result<()> {
    for i in 0..m {
        for j in 0..i {
            let (a, b) = (h[i * m + j], h[j * m + i]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(DreError::InvalidParameter(format!("quadratic H is not symmetric at ({i},{j})")));
            }
        }
    }
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let d = h[j * m + j] - (0..j).map(|p| l[j * m + p] * l[j * m + p]).sum::<f64>();
        if !(d > 0.0) {
            return Err(DreError::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[j * m + j] = djj;
        for i in j + 1..m {
            let s = h[i * m + j] - (0..j).map(|p| l[i * m + p] * l[j * m + p]).sum::<f64>();
            l[i * m + j] = s / djj;
        }
    }
    Ok(())
}

pub fn f_value(obj: &ConvexObjective, r: &RatioVector) -> Result<f64> {
    obj.check_ratio(r.values())?;
    Ok(obj.value(r.values()))
}

pub fn f_gradient(obj: &ConvexObjective, r: &RatioVector) -> Result<Vec<f64>> {
    obj.check_ratio(r.values())?;
    Ok(obj.gradient(r.values()))
}

pub fn bregman(obj: &ConvexObjective, x: &RatioVector, y: &RatioVector) -> Result<f64> {
    obj.check_ratio(x.values())?;
    obj.check_ratio(y.values())?;
    Ok(obj.bregman(x.values(), y.values()))
}

/// Model outputs evaluated at each group's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    pub per_group: Vec<Vec<RatioVector>>,
}

impl LossBatch {
    pub fn new(per_group: Vec<Vec<RatioVector>>) -> Result<Self> {
        if per_group.len() < 2 {
            return Err(DreError::InvalidParameter("a loss batch needs at least 2 groups".into()));
        }
        if let Some(i) = per_group.iter().position(Vec::is_empty) {
            return Err(DreError::EmptySamples(format!("loss batch group {} is empty", i + 1)));
        }
        Ok(Self { per_group })
    }

    /// Evaluate `model` on the samples selected by `batch`.
    pub fn from_model(model: &RatioModel, dataset: &GroupedDataset, batch: &Minibatch) -> Result<Self> {
        batch.validate(dataset)?;
        let per_group = batch
            .indices
            .iter()
            .enumerate()
            .map(|(g, idx)| idx.iter().map(|&j| model.eval(&dataset.group(g)[j])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_group)
    }

    pub fn k(&self) -> usize {
        self.per_group.len()
    }
}

/// Empirical Bregman DRE loss: pivot-group mean of `<∇f, r̂> - f` minus the
/// per-group means of `∂_i f`.
pub fn dre_loss(obj: &ConvexObjective, batch: &LossBatch) -> Result<f64> {
    let k = batch.k();
    if k != obj.k() {
        return Err(DreError::DimensionMismatch { expected: obj.k(), got: k });
    }
    let mut loss = 0.0;
    for (g, rs) in batch.per_group.iter().enumerate() {
        let mut acc = 0.0;
        for r in rs {
            obj.check_ratio(r.values())?;
            acc += if g == k - 1 { obj.pivot_term(r.values()) } else { obj.group_term(g, r.values()) };
        }
        loss += acc / rs.len() as f64;
    }
    Ok(loss)
}

/// Bregman DRE loss of `model` on a minibatch.
pub fn dre_loss_model(
    obj: &ConvexObjective,
    model: &RatioModel,
    dataset: &GroupedDataset,
    batch: &Minibatch,
) -> Result<f64> {
    dre_loss(obj, &LossBatch::from_model(model, dataset, batch)?)
}

/// Loss and its exact gradient with respect to the model parameters.
pub fn dre_loss_gradient(
    obj: &ConvexObjective,
    model: &RatioModel,
    dataset: &GroupedDataset,
    batch: &Minibatch,
) -> Result<(f64, Vec<f64>)> {
    batch.validate(dataset)?;
    let k = dataset.k();
    if k != obj.k() || model.output_dim() != obj.dim() {
        return Err(DreError::DimensionMismatch { expected: obj.dim(), got: model.output_dim() });
    }
    let m = obj.dim();
    let mut grad = vec![0.0; model.n_params()];
    let mut loss = 0.0;
    let mut d = vec![0.0; m];
    for (g, idx) in batch.indices.iter().enumerate() {
        let w = 1.0 / idx.len() as f64;
        let mut acc = 0.0;
        for &j in idx {
            let fw = model.forward(&dataset.group(g)[j])?;
            let r = fw.ratios();
            let h = obj.hessian(r);
            if g == k - 1 {
                acc += obj.pivot_term(r);
                for (a, da) in d.iter_mut().enumerate() {
                    *da = w * (0..m).map(|b| h[a * m + b] * r[b]).sum::<f64>();
                }
            } else {
                acc += obj.group_term(g, r);
                for (a, da) in d.iter_mut().enumerate() {
                    *da = -w * h[g * m + a];
                }
            }
            model.backward(&fw, &d, &mut grad);
        }
        loss += acc * w;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds(k: usize) -> Vec<ConvexObjective> {
        vec![
            ConvexObjective::multi_lr(Prior::new((1..=k).map(|i| i as f64 / (k * (k + 1) / 2) as f64).collect()).unwrap())
                .unwrap(),
            ConvexObjective::lsif(k).unwrap(),
            ConvexObjective::kliep(k).unwrap(),
            ConvexObjective::power(k, 1.5).unwrap(),
            ConvexObjective::quadratic_default(k).unwrap(),
            ConvexObjective::log_sum_exp(k, 2.0).unwrap(),
        ]
    }

    #[test]
    fn value_examples() {
        assert_eq!(ConvexObjective::lsif(3).unwrap().value(&[1.0, 1.0]), 0.0);
        let kl = ConvexObjective::kliep(2).unwrap().value(&[2.0]);
        assert!((kl - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-15);
        assert!((kl + 0.61371).abs() < 1e-5);
        assert!((ConvexObjective::power(3, 2.0).unwrap().value(&[2.0, 3.0]) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(ConvexObjective::lsif(3).unwrap().gradient(&[2.0, 1.0]), vec![1.0, 0.0]);
        assert_eq!(ConvexObjective::kliep(3).unwrap().gradient(&[1.0, 1.0]), vec![0.0, 0.0]);
        let g = ConvexObjective::log_sum_exp(4, 0.7).unwrap().gradient(&[1.0, 5.0, 0.2]);
        assert!(g.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let r = [1.3, 0.7];
        for obj in all_kinds(3) {
            let g = obj.gradient(&r);
            let h = obj.hessian(&r);
            for i in 0..2 {
                let eps = 1e-5;
                let mut rp = r;
                let mut rm = r;
                rp[i] += eps;
                rm[i] -= eps;
                let fd = (obj.value(&rp) - obj.value(&rm)) / (2.0 * eps);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{:?} grad {i}", obj.name());
                let gp = obj.gradient(&rp);
                let gm = obj.gradient(&rm);
                for j in 0..2 {
                    let fd = (gp[j] - gm[j]) / (2.0 * eps);
                    assert!((fd - h[j * 2 + i]).abs() <= 1e-6 * fd.abs().max(1.0), "{:?} hess", obj.name());
                }
            }
        }
    }

    #[test]
    fn bregman_examples() {
        for obj in all_kinds(3) {
            assert_eq!(obj.bregman(&[1.7, 0.4], &[1.7, 0.4]), 0.0);
        }
        assert!((ConvexObjective::lsif(2).unwrap().bregman(&[2.0], &[1.0]) - 0.5).abs() < 1e-15);
        let b = ConvexObjective::kliep(2).unwrap().bregman(&[2.0], &[1.0]);
        assert!((b - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((b - 0.38629).abs() < 1e-5);
    }

    #[test]
    fn bregman_closed_forms_agree_with_definition() {
        for obj in all_kinds(4) {
            let x = [0.3, 2.2, 1.1];
            let y = [1.9, 0.5, 1.0];
            let gy = obj.raw_gradient(&y);
            let def = obj.raw_value(&x) - obj.raw_value(&y) - dot(&gy, &[x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
            let b = obj.bregman(&x, &y);
            assert!((def - b).abs() < 1e-12 * def.abs().max(1.0), "{:?}: {def} vs {b}", obj.name());
            let bn = obj.normalized().bregman(&x, &y);
            assert_eq!(b, bn);
        }
    }

    #[test]
    fn normalized_vanishes_at_one() {
        for obj in all_kinds(3) {
            let n = obj.normalized();
            assert!(n.value(&[1.0, 1.0]).abs() < 1e-15);
            assert!(n.gradient(&[1.0, 1.0]).iter().all(|g| g.abs() < 1e-15));
            let r = [0.4, 2.5];
            assert!((n.value(&r) - obj.bregman(&r, &[1.0, 1.0])).abs() < 1e-12);
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(ConvexObjective::power(3, 1.0).is_err());
        assert!(ConvexObjective::log_sum_exp(3, 0.0).is_err());
        assert!(ConvexObjective::lsif(1).is_err());
        assert!(matches!(
            ConvexObjective::quadratic(vec![1.0, 2.0, 2.0, 1.0], vec![0.0, 0.0]),
            Err(DreError::NotPositiveDefinite { .. })
        ));
        assert!(ConvexObjective::quadratic(vec![1.0, 0.3, 0.2, 1.0], vec![0.0, 0.0]).is_err());
        assert!(ConvexObjective::quadratic(vec![2.0, 0.5, 0.5, 1.0], vec![-2.0, -2.0]).is_ok());
        assert!(ConvexObjective::multi_lr(Prior::uniform(3)).unwrap().k() == 3);
        assert_eq!("LogSumExp".parse::<ObjectiveName>().unwrap(), ObjectiveName::LogSumExp);
        assert_eq!("multi-lr".parse::<ObjectiveName>().unwrap(), ObjectiveName::MultiLr);
        assert!("nope".parse::<ObjectiveName>().is_err());
    }

    fn constant_batch(k: usize, c: f64, n: usize) -> LossBatch {
        LossBatch::new(vec![vec![RatioVector::new(vec![c; k - 1]).unwrap(); n]; k]).unwrap()
    }

    #[test]
    fn dre_loss_examples() {
        let lsif = ConvexObjective::lsif(2).unwrap();
        assert_eq!(dre_loss(&lsif, &constant_batch(2, 1.0, 5)).unwrap(), 0.0);
        assert!((dre_loss(&lsif, &constant_batch(2, 2.0, 5)).unwrap() - 0.5).abs() < 1e-15);

        // KLIEP with a constant model c: loss = c - ln c, minimized at c = 1.
        let kliep = ConvexObjective::kliep(2).unwrap();
        let scan: Vec<f64> =
            [0.5, 1.0, 2.0].iter().map(|&c| dre_loss(&kliep, &constant_batch(2, c, 3)).unwrap()).collect();
        for (c, l) in [0.5f64, 1.0, 2.0].iter().zip(&scan) {
            assert!((l - (c - c.ln())).abs() < 1e-14);
        }
        assert!(scan[1] < scan[0] && scan[1] < scan[2]);

        assert!(matches!(
            dre_loss(&kliep, &constant_batch(3, 1.0, 2)),
            Err(DreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalization_shifts_loss_by_f_at_one() {
        let batch = LossBatch::new(vec![
            vec![RatioVector::new(vec![0.5, 2.0]).unwrap(), RatioVector::new(vec![1.5, 0.2]).unwrap()],
            vec![RatioVector::new(vec![3.0, 1.0]).unwrap()],
            vec![RatioVector::new(vec![0.9, 1.1]).unwrap(), RatioVector::new(vec![0.1, 4.0]).unwrap()],
        ])
        .unwrap();
        for obj in all_kinds(3) {
            let a = dre_loss(&obj, &batch).unwrap();
            let b = dre_loss(&obj.normalized(), &batch).unwrap();
            assert!((b - a - obj.raw_value(&[1.0, 1.0])).abs() < 1e-12, "{:?}", obj.name());
        }
    }

    #[test]
    fn exp_remainder_is_accurate() {
        for z in [-3.0f64, -0.6, -0.49, -1e-3, 0.0, 1e-8, 0.3, 0.5, 2.0] {
            let exact = if z == 0.0 { 0.0 } else { z.exp_m1() - z };
            let got = exp_remainder(z);
            if z.abs() > 1e-3 {
                assert!((got - exact).abs() <= 1e-13 * exact.abs(), "{z}");
            }
        }
        assert!((exp_remainder(1e-8) - (5e-17 + 1e-24 / 6.0)).abs() < 1e-30);
    }
}
