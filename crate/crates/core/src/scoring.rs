//! Proper scoring rules composed with the inverse link.
//!
//! Each rule is evaluated from `log η̂`, which the inverse link produces with
//! a max shift, so huge or tiny ratios never overflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, Minibatch, Prior};
use crate::diagnostics::record_score_cap;
use crate::error::{DreError, Result};
use crate::link::{link_inverse_log, log_sum_exp, ProbabilityVector};
use crate::models::RatioModel;

/// Largest value a single pointwise loss may take.
pub const DEFAULT_LOSS_CAP: f64 = 1e6;

/// Default pseudo-spherical exponent.
pub const DEFAULT_PS_ALPHA: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum ScoringRule {
    Log,
    Brier,
    PseudoSpherical { alpha: f64 },
}

impl ScoringRule {
    pub fn pseudo_spherical(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(DreError::InvalidParameter(format!("pseudo-spherical alpha must be > 1, got {alpha}")));
        }
        Ok(ScoringRule::PseudoSpherical { alpha })
    }

    /// Parse a rule name; `alpha` is only consulted for the pseudo-spherical
    /// rule and defaults to [`DEFAULT_PS_ALPHA`].
    pub fn from_name(name: &str, alpha: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "log" | "logloss" => Ok(ScoringRule::Log),
            "brier" => Ok(ScoringRule::Brier),
            "pseudospherical" | "spherical" | "ps" => Self::pseudo_spherical(alpha.unwrap_or(DEFAULT_PS_ALPHA)),
            _ => Err(DreError::InvalidParameter(format!(
                "unknown scoring rule '{name}' (expected log, brier or pseudospherical)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoringRule::Log => "log",
            ScoringRule::Brier => "brier",
            ScoringRule::PseudoSpherical { .. } => "pseudospherical",
        }
    }

    fn validate(&self) -> Result<()> {
        if let ScoringRule::PseudoSpherical { alpha } = self {
            Self::pseudo_spherical(*alpha)?;
        }
        Ok(())
    }

    /// Loss of predicting `exp(log_eta)` when the label is `label`, before
    /// capping.
    fn raw_from_log(&self, label: usize, log_eta: &[f64]) -> f64 {
        match *self {
            ScoringRule::Log => -log_eta[label],
            ScoringRule::Brier => {
                let sq: f64 = log_eta.iter().map(|l| (2.0 * l).exp()).sum();
                -2.0 * log_eta[label].exp() + sq + 1.0
            }
            ScoringRule::PseudoSpherical { alpha } => {
                let scaled: Vec<f64> = log_eta.iter().map(|l| alpha * l).collect();
                -(alpha - 1.0) * log_eta[label] + (alpha - 1.0) / alpha * log_sum_exp(&scaled)
            }
        }
    }

    /// Gradient of the loss with respect to the canonical ratios `r_m`,
    /// `m < k-1`, written into `out`. Uses
    /// `∂η̂_j/∂r_m = η̂_j (δ_jm - η̂_m) / r_m`.
    fn ratio_gradient(&self, label: usize, log_eta: &[f64], r: &[f64], scale: f64, out: &mut [f64]) {
        let eta: Vec<f64> = log_eta.iter().map(|l| l.exp()).collect();
        match *self {
            ScoringRule::Log => {
                for m in 0..r.len() {
                    let delta = if m == label { 1.0 } else { 0.0 };
                    out[m] = scale * (eta[m] - delta) / r[m];
                }
            }
            ScoringRule::Brier => {
                let sq: f64 = eta.iter().map(|e| e * e).sum();
                let centre = -2.0 * eta[label] + 2.0 * sq;
                for m in 0..r.len() {
                    let g = if m == label { -2.0 } else { 0.0 } + 2.0 * eta[m];
                    out[m] = scale * eta[m] / r[m] * (g - centre);
                }
            }
            ScoringRule::PseudoSpherical { alpha } => {
                let scaled: Vec<f64> = log_eta.iter().map(|l| alpha * l).collect();
                let lse = log_sum_exp(&scaled);
                for m in 0..r.len() {
                    let delta = if m == label { 1.0 } else { 0.0 };
                    out[m] = scale * (alpha - 1.0) / r[m] * ((scaled[m] - lse).exp() - delta);
                }
            }
        }
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringRule::PseudoSpherical { alpha } => write!(f, "pseudospherical(alpha={alpha})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ScoringRule {
    type Err = DreError;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s, None)
    }
}

fn cap_loss(v: f64, cap: f64) -> (f64, bool) {
    if v.is_nan() || v > cap {
        record_score_cap();
        (cap, true)
    } else {
        (v, false)
    }
}

/// `ℓ(label, η̂)` for a zero-based label, capped at [`DEFAULT_LOSS_CAP`].
pub fn pointwise_loss(rule: &ScoringRule, label: usize, eta_hat: &ProbabilityVector) -> Result<f64> {
    pointwise_loss_capped(rule, label, eta_hat, DEFAULT_LOSS_CAP)
}

/// As [`pointwise_loss`], with an explicit cap for `η̂_label = 0`.
pub fn pointwise_loss_capped(rule: &ScoringRule, label: usize, eta_hat: &ProbabilityVector, cap: f64) -> Result<f64> {
    rule.validate()?;
    if label >= eta_hat.k() {
        return Err(DreError::InvalidParameter(format!("label {label} out of range for k = {}", eta_hat.k())));
    }
    let log_eta: Vec<f64> = eta_hat.values().iter().map(|v| v.ln()).collect();
    Ok(cap_loss(rule.raw_from_log(label, &log_eta), cap).0)
}

/// `Σ_i p_i ℓ(i, q)`: the expected loss of predicting `q` when labels follow
/// `p`.
pub fn expected_loss(rule: &ScoringRule, p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    if p.k() != q.k() {
        return Err(DreError::DimensionMismatch { expected: p.k(), got: q.k() });
    }
    let mut total = 0.0;
    for i in 0..p.k() {
        if p.get(i) > 0.0 {
            total += p.get(i) * pointwise_loss(rule, i, q)?;
        }
    }
    Ok(total)
}

fn check_inputs(rule: &ScoringRule, model: &RatioModel, dataset: &GroupedDataset, prior: &Prior, batch: &Minibatch) -> Result<()> {
    rule.validate()?;
    batch.validate(dataset)?;
    if prior.k() != dataset.k() {
        return Err(DreError::DimensionMismatch { expected: dataset.k(), got: prior.k() });
    }
    if model.output_dim() + 1 != dataset.k() {
        return Err(DreError::DimensionMismatch { expected: dataset.k() - 1, got: model.output_dim() });
    }
    Ok(())
}

/// `Σ_i π_i · mean_{x ∈ batch_i} ℓ(i, Ψ⁻¹(r̂(x)))`.
pub fn cpe_dre_loss(
    rule: &ScoringRule,
    model: &RatioModel,
    dataset: &GroupedDataset,
    prior: &Prior,
    batch: &Minibatch,
) -> Result<f64> {
    check_inputs(rule, model, dataset, prior, batch)?;
    let mut loss = 0.0;
    for (g, idx) in batch.indices.iter().enumerate() {
        let mut acc = 0.0;
        for &j in idx {
            let fw = model.forward(&dataset.group(g)[j])?;
            let log_r: Vec<f64> = fw.ratios().iter().map(|v| v.ln()).collect();
            let log_eta = link_inverse_log(&log_r, prior);
            acc += cap_loss(rule.raw_from_log(g, &log_eta), DEFAULT_LOSS_CAP).0;
        }
        loss += prior.get(g) * acc / idx.len() as f64;
    }
    Ok(loss)
}

/// [`cpe_dre_loss`] together with its gradient in the model parameters.
/// Capped samples contribute no gradient.
pub fn cpe_dre_loss_gradient(
    rule: &ScoringRule,
    model: &RatioModel,
    dataset: &GroupedDataset,
    prior: &Prior,
    batch: &Minibatch,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(rule, model, dataset, prior, batch)?;
    let mut grad = vec![0.0; model.n_params()];
    let mut d = vec![0.0; model.output_dim()];
    let mut loss = 0.0;
    for (g, idx) in batch.indices.iter().enumerate() {
        let w = prior.get(g) / idx.len() as f64;
        for &j in idx {
            let fw = model.forward(&dataset.group(g)[j])?;
            let r = fw.ratios();
            let log_r: Vec<f64> = r.iter().map(|v| v.ln()).collect();
            let log_eta = link_inverse_log(&log_r, prior);
            let (v, capped) = cap_loss(rule.raw_from_log(g, &log_eta), DEFAULT_LOSS_CAP);
            loss += w * v;
            if !capped {
                rule.ratio_gradient(g, &log_eta, r, w, &mut d);
                model.backward(&fw, &d, &mut grad);
            }
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, Architecture, FeatureMap, ModelSpec, DEFAULT_CLAMP};
    use crate::objectives::{dre_loss_model, ConvexObjective};

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pointwise_examples() {
        assert_eq!(pointwise_loss(&ScoringRule::Brier, 0, &pv(&[1.0, 0.0])).unwrap(), 0.0);
        let l = pointwise_loss(&ScoringRule::Log, 2, &ProbabilityVector::uniform(4)).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        let ps = ScoringRule::pseudo_spherical(2.0).unwrap();
        let l = pointwise_loss(&ps, 0, &pv(&[0.8, 0.2])).unwrap();
        assert!((l - 0.030312).abs() < 1e-6);
        assert!((l + (0.8 / 0.68f64.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_is_capped() {
        let before = crate::diagnostics::score_cap_events();
        assert_eq!(pointwise_loss(&ScoringRule::Log, 1, &pv(&[1.0, 0.0])).unwrap(), DEFAULT_LOSS_CAP);
        let ps = ScoringRule::pseudo_spherical(1.8).unwrap();
        assert_eq!(pointwise_loss_capped(&ps, 1, &pv(&[1.0, 0.0]), 50.0).unwrap(), 50.0);
        assert!(crate::diagnostics::score_cap_events() >= before + 2);
    }

    #[test]
    fn parsing_and_validation() {
        assert_eq!("brier".parse::<ScoringRule>().unwrap(), ScoringRule::Brier);
        assert_eq!(
            ScoringRule::from_name("pseudospherical", None).unwrap(),
            ScoringRule::PseudoSpherical { alpha: 1.8 }
        );
        assert!(ScoringRule::pseudo_spherical(1.0).is_err());
        assert!(ScoringRule::from_name("hinge", None).is_err());
        assert!(pointwise_loss(&ScoringRule::Log, 3, &pv(&[0.5, 0.5])).is_err());
    }

    fn toy_dataset() -> GroupedDataset {
        GroupedDataset::new(vec![
            vec![vec![0.1, 0.4], vec![-0.2, 1.0], vec![0.5, -0.3]],
            vec![vec![1.1, 0.0], vec![0.0, 0.0]],
            vec![vec![-0.7, 0.2], vec![0.3, 0.3], vec![0.9, -1.0], vec![0.2, 0.1]],
        ])
        .unwrap()
    }

    fn random_loglinear(seed: u64) -> RatioModel {
        use rand::Rng;
        let arch = Architecture::LogLinear { features: FeatureMap::Identity { dim: 2 }, outputs: 2 };
        let mut rng = crate::rng::stream(seed, "test");
        let params = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        RatioModel::new(arch, DEFAULT_CLAMP, params).unwrap()
    }

    #[test]
    fn constant_model_gives_log_k() {
        let ds = toy_dataset();
        let m = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 2 }, 2), 0).unwrap();
        let l = cpe_dre_loss(&ScoringRule::Log, &m, &ds, &Prior::uniform(3), &Minibatch::full(&ds)).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_rule_matches_multi_lr() {
        let ds = toy_dataset();
        let batch = Minibatch::full(&ds);
        for seed in 0..5 {
            let m = random_loglinear(seed);
            let prior = Prior::new(vec![0.2, 0.3, 0.5]).unwrap();
            let a = cpe_dre_loss(&ScoringRule::Log, &m, &ds, &prior, &batch).unwrap();
            let obj = ConvexObjective::multi_lr(prior).unwrap();
            let b = dre_loss_model(&obj, &m, &ds, &batch).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let ds = toy_dataset();
        let batch = Minibatch::full(&ds);
        let prior = Prior::new(vec![0.25, 0.35, 0.4]).unwrap();
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::PseudoSpherical { alpha: 1.8 }] {
            let m = random_loglinear(7);
            let (_, g) = cpe_dre_loss_gradient(&rule, &m, &ds, &prior, &batch).unwrap();
            for p in 0..m.n_params() {
                let eps = 1e-6;
                let mut a = m.clone();
                a.params_mut()[p] += eps;
                let mut b = m.clone();
                b.params_mut()[p] -= eps;
                let fd = (cpe_dre_loss(&rule, &a, &ds, &prior, &batch).unwrap()
                    - cpe_dre_loss(&rule, &b, &ds, &prior, &batch).unwrap())
                    / (2.0 * eps);
                assert!((fd - g[p]).abs() <= 1e-6 * fd.abs().max(1e-3), "{rule}: {fd} vs {}", g[p]);
            }
        }
    }

    #[test]
    fn brier_and_log_are_proper_on_a_grid() {
        let p = pv(&[0.3, 0.5, 0.2]);
        for rule in [ScoringRule::Log, ScoringRule::Brier] {
            let at_p = expected_loss(&rule, &p, &p).unwrap();
            for a in 1..100 {
                for b in 1..(100 - a) {
                    let q = pv(&[a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0]);
                    assert!(expected_loss(&rule, &p, &q).unwrap() >= at_p - 1e-12);
                }
            }
        }
    }

    #[test]
    fn pseudo_spherical_minimizer_is_shifted() {
        // The log form of the pseudo-spherical score is not proper: its
        // expected loss under p = (0.8, 0.2) is lower at (0.7, 0.3) than at p.
        let ps = ScoringRule::pseudo_spherical(2.0).unwrap();
        let p = pv(&[0.8, 0.2]);
        let at_p = expected_loss(&ps, &p, &p).unwrap();
        let off = expected_loss(&ps, &p, &pv(&[0.7, 0.3])).unwrap();
        assert!((at_p - 0.3076).abs() < 1e-3 && (off - 0.2537).abs() < 1e-3);
        assert!(off < at_p);
    }
}
