//! Multi-distribution f-divergences and numerical checks of the identities
//! linking Bregman ratio estimation to proper-loss classification.
//!
//! Convex functions here act on `R^{k-1}`. Functions of a probability vector
//! `η ∈ Δ_k` are written in reduced coordinates `(η_1, ..., η_{k-1})` with
//! `η_k = 1 - Σ_i η_i`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, Minibatch, Point, Prior};
use crate::error::{DreError, Result};
use crate::link::{link_forward, ProbabilityVector, RatioVector};
use crate::models::RatioModel;
use crate::objectives::{dre_loss_model, ConvexObjective};
use crate::rng::{self, StreamRng};
use crate::scoring::{expected_loss, ScoringRule};

/// A differentiable convex function on (a subset of) `R^m`.
pub trait ReducedConvex {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `f(x) - f(y) - <∇f(y), x - y>`, straight from the definition.
    fn bregman_generic(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.gradient(y);
        self.value(x) - self.value(y) - g.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum::<f64>()
    }
}

impl ReducedConvex for ConvexObjective {
    fn dim(&self) -> usize {
        ConvexObjective::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        ConvexObjective::value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        ConvexObjective::gradient(self, x)
    }
}

/// Negative generalized entropy `f = -L̲` of a proper scoring rule, as a
/// function of the first `k-1` class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct NegEntropy {
    rule: ScoringRule,
    k: usize,
}

impl NegEntropy {
    /// Only the log and Brier rules are supported.
    pub fn new(rule: ScoringRule, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(DreError::InvalidParameter(format!("need k >= 2, got {k}")));
        }
        match rule {
            ScoringRule::Log | ScoringRule::Brier => Ok(Self { rule, k }),
            ScoringRule::PseudoSpherical { .. } => Err(DreError::InvalidParameter(
                "the log pseudo-spherical score is not proper, so it has no Bregman regret form".into(),
            )),
        }
    }

    fn last(&self, p: &[f64]) -> f64 {
        1.0 - p.iter().sum::<f64>()
    }
}

impl ReducedConvex for NegEntropy {
    fn dim(&self) -> usize {
        self.k - 1
    }

    fn value(&self, p: &[f64]) -> f64 {
        let pk = self.last(p);
        match self.rule {
            ScoringRule::Log => p.iter().chain(std::iter::once(&pk)).map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum(),
            _ => p.iter().map(|v| v * v).sum::<f64>() + pk * pk - 1.0,
        }
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let pk = self.last(p);
        match self.rule {
            ScoringRule::Log => p.iter().map(|v| (v / pk).ln()).collect(),
            _ => p.iter().map(|v| 2.0 * v - 2.0 * pk).collect(),
        }
    }
}

/// `f⊛(u) = s · f(u / s)` with `s = 1 + Σ_i u_i`.
#[derive(Debug, Clone)]
pub struct Perspective<F> {
    pub base: F,
}

impl<F: ReducedConvex> ReducedConvex for Perspective<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let s = 1.0 + u.iter().sum::<f64>();
        let w: Vec<f64> = u.iter().map(|v| v / s).collect();
        s * self.base.value(&w)
    }

    /// `f(w) 1 + (I - (1/s) 1 uᵀ) ∇f(w)`, `w = u / s`.
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let s = 1.0 + u.iter().sum::<f64>();
        let w: Vec<f64> = u.iter().map(|v| v / s).collect();
        let fw = self.base.value(&w);
        let g = self.base.gradient(&w);
        let ug: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
        g.iter().map(|gj| fw + gj - ug / s).collect()
    }
}

/// `f⊛_π(r) = f⊛(π_{1:k-1} ∘ r / π_k)`.
#[derive(Debug, Clone)]
pub struct PriorPerspective<F> {
    pub perspective: Perspective<F>,
    scale: Vec<f64>,
}

impl<F: ReducedConvex> PriorPerspective<F> {
    pub fn new(base: F, prior: &Prior) -> Result<Self> {
        if prior.k() != base.dim() + 1 {
            return Err(DreError::DimensionMismatch { expected: base.dim() + 1, got: prior.k() });
        }
        let scale = (0..base.dim()).map(|i| prior.get(i) / prior.pivot()).collect();
        Ok(Self { perspective: Perspective { base }, scale })
    }

    fn to_u(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.scale).map(|(a, b)| a * b).collect()
    }
}

impl<F: ReducedConvex> ReducedConvex for PriorPerspective<F> {
    fn dim(&self) -> usize {
        self.scale.len()
    }

    fn value(&self, r: &[f64]) -> f64 {
        self.perspective.value(&self.to_u(r))
    }

    fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let g = self.perspective.gradient(&self.to_u(r));
        g.iter().zip(&self.scale).map(|(a, b)| a * b).collect()
    }
}

/// A joint distribution over `k` classes and a finite support of `m` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteExperiment {
    prior: Prior,
    /// `conditionals[i][x] = P_i(x)`.
    conditionals: Vec<Vec<f64>>,
}

impl DiscreteExperiment {
    pub fn new(prior: Prior, conditionals: Vec<Vec<f64>>) -> Result<Self> {
        if conditionals.len() != prior.k() {
            return Err(DreError::DimensionMismatch { expected: prior.k(), got: conditionals.len() });
        }
        let m = conditionals[0].len();
        for (i, c) in conditionals.iter().enumerate() {
            if c.len() != m || m == 0 {
                return Err(DreError::InvalidProbability(format!("conditional {} has the wrong support size", i + 1)));
            }
            if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(DreError::InvalidProbability(format!("conditional {} has a non-positive mass", i + 1)));
            }
            let s: f64 = c.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(DreError::InvalidProbability(format!("conditional {} sums to {s}", i + 1)));
            }
        }
        Ok(Self { prior, conditionals })
    }

    /// Conditionals with masses drawn from `U(0.05, 1)` and normalized.
    pub fn random(prior: Prior, m: usize, rng: &mut StreamRng) -> Result<Self> {
        let conditionals = (0..prior.k())
            .map(|_| {
                let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Self::new(prior, conditionals)
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn k(&self) -> usize {
        self.prior.k()
    }

    pub fn support_size(&self) -> usize {
        self.conditionals[0].len()
    }

    pub fn mass(&self, i: usize, x: usize) -> f64 {
        self.conditionals[i][x]
    }

    /// `M(x) = Σ_i π_i P_i(x)`.
    pub fn marginal(&self, x: usize) -> f64 {
        (0..self.k()).map(|i| self.prior.get(i) * self.conditionals[i][x]).sum()
    }

    /// Bayes class probabilities at `x`.
    pub fn eta(&self, x: usize) -> ProbabilityVector {
        let m = self.marginal(x);
        ProbabilityVector::from_trusted((0..self.k()).map(|i| self.prior.get(i) * self.conditionals[i][x] / m).collect())
    }

    /// `r_i(x) = P_i(x) / P_k(x)`.
    pub fn ratios(&self, x: usize) -> RatioVector {
        let pk = self.conditionals[self.k() - 1][x];
        RatioVector::from_trusted((0..self.k() - 1).map(|i| self.conditionals[i][x] / pk).collect())
    }
}

/// Monte-Carlo estimate `mean_x f̃(r(x))` over pivot samples together with
/// its standard error, where `f̃(r) = B_f(r, 1)`.
pub fn fdiv_plugin_with_se(
    obj: &ConvexObjective,
    true_ratio: impl Fn(&Point) -> RatioVector,
    pivot_samples: &[Point],
) -> Result<(f64, f64)> {
    if pivot_samples.is_empty() {
        return Err(DreError::EmptySamples("no pivot samples".into()));
    }
    let norm = obj.normalized();
    let vals: Vec<f64> = pivot_samples.iter().map(|x| norm.value(true_ratio(x).values())).collect();
    Ok(mean_and_se(&vals))
}

pub(crate) fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Plug-in f-divergence estimate under the normalized `f̃`.
pub fn fdiv_plugin(obj: &ConvexObjective, true_ratio: impl Fn(&Point) -> RatioVector, pivot_samples: &[Point]) -> Result<f64> {
    Ok(fdiv_plugin_with_se(obj, true_ratio, pivot_samples)?.0)
}

/// Exact `Σ_x P_k(x) f̃(r(x))`.
pub fn fdiv_exact(obj: &ConvexObjective, exp: &DiscreteExperiment) -> f64 {
    let norm = obj.normalized();
    let k = exp.k();
    (0..exp.support_size()).map(|x| exp.mass(k - 1, x) * norm.value(exp.ratios(x).values())).sum()
}

/// Fenchel value at `s = ∇f̃(r̂)`: `s` and `f*(s) = <s, r̂> - f̃(r̂)`.
fn fenchel_pair(norm: &ConvexObjective, r: &[f64]) -> (Vec<f64>, f64) {
    let s = norm.gradient(r);
    let conj = s.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() - norm.value(r);
    (s, conj)
}

/// Variational lower bound `Σ_{i<k} E_i[s_i] - E_k[f*(s)]` at
/// `s = ∇f̃(r̂(x))`, over every sample in `dataset`.
pub fn fdiv_variational(obj: &ConvexObjective, model: &RatioModel, dataset: &GroupedDataset) -> Result<f64> {
    let k = dataset.k();
    if obj.k() != k || model.output_dim() + 1 != k {
        return Err(DreError::DimensionMismatch { expected: k, got: obj.k() });
    }
    let norm = obj.normalized();
    let mut total = 0.0;
    for g in 0..k {
        let pts = dataset.group(g);
        let mut acc = 0.0;
        for x in pts {
            let r = model.eval(x)?;
            let (s, conj) = fenchel_pair(&norm, r.values());
            acc += if g == k - 1 { -conj } else { s[g] };
        }
        total += acc / pts.len() as f64;
    }
    Ok(total)
}

/// Variational bound with exact expectations over a discrete experiment.
pub fn fdiv_variational_exact(
    obj: &ConvexObjective,
    exp: &DiscreteExperiment,
    r_hat: impl Fn(usize) -> RatioVector,
) -> f64 {
    let norm = obj.normalized();
    let k = exp.k();
    let mut total = 0.0;
    for x in 0..exp.support_size() {
        let (s, conj) = fenchel_pair(&norm, r_hat(x).values());
        total += (0..k - 1).map(|i| exp.mass(i, x) * s[i]).sum::<f64>() - exp.mass(k - 1, x) * conj;
    }
    total
}

/// `|B_f(u/(1+Σu), v/(1+Σv)) - B_{f⊛}(u, v)/(1+Σu)|`.
pub fn verify_bregman_identity<F: ReducedConvex + Clone>(f: &F, u: &[f64], v: &[f64]) -> Result<f64> {
    check_positive(u, f.dim())?;
    check_positive(v, f.dim())?;
    let su = 1.0 + u.iter().sum::<f64>();
    let sv = 1.0 + v.iter().sum::<f64>();
    let a: Vec<f64> = u.iter().map(|x| x / su).collect();
    let b: Vec<f64> = v.iter().map(|x| x / sv).collect();
    let lhs = f.bregman_generic(&a, &b);
    let rhs = Perspective { base: f.clone() }.bregman_generic(u, v) / su;
    Ok((lhs - rhs).abs())
}

fn check_positive(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(DreError::DimensionMismatch { expected: dim, got: x.len() });
    }
    if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(DreError::InvalidRatio("arguments must be strictly positive".into()));
    }
    Ok(())
}

/// `|B_f(η, η̂)(π_k + Σ π_i r_i) - π_k B_{f⊛_π}(r, r̂)|` with `r = Ψ(η)`,
/// `r̂ = Ψ(η̂)`, `f` acting on the first `k-1` class probabilities.
pub fn verify_prior_identity<F: ReducedConvex + Clone>(
    f: &F,
    eta: &ProbabilityVector,
    eta_hat: &ProbabilityVector,
    prior: &Prior,
) -> Result<f64> {
    let r = link_forward(eta, prior)?;
    let rh = link_forward(eta_hat, prior)?;
    let m = f.dim();
    let lhs = f.bregman_generic(&eta.values()[..m], &eta_hat.values()[..m])
        * (prior.pivot() + r.values().iter().enumerate().map(|(i, v)| prior.get(i) * v).sum::<f64>());
    let rhs = prior.pivot() * PriorPerspective::new(f.clone(), prior)?.bregman_generic(r.values(), rh.values());
    Ok((lhs - rhs).abs())
}

/// Classification regret `Σ_x M(x) [L(η, η̂) - L(η, η)]`.
pub fn classification_regret(
    rule: &ScoringRule,
    exp: &DiscreteExperiment,
    eta_hat: impl Fn(usize) -> ProbabilityVector,
) -> Result<f64> {
    let mut total = 0.0;
    for x in 0..exp.support_size() {
        let eta = exp.eta(x);
        total += exp.marginal(x) * (expected_loss(rule, &eta, &eta_hat(x))? - expected_loss(rule, &eta, &eta)?);
    }
    Ok(total)
}

/// `|reg(η̂) - π_k E_{P_k} B_{f⊛_π}(r, r̂)|` with exact sums over the support.
pub fn verify_regret_identity(
    rule: &ScoringRule,
    exp: &DiscreteExperiment,
    eta_hat: impl Fn(usize) -> ProbabilityVector,
) -> Result<f64> {
    let k = exp.k();
    let f = PriorPerspective::new(NegEntropy::new(*rule, k)?, exp.prior())?;
    let mut rhs = 0.0;
    for x in 0..exp.support_size() {
        let eh = eta_hat(x);
        if eh.values().iter().any(|v| *v <= 0.0) {
            return Err(DreError::InvalidProbability("predicted probabilities must be strictly positive".into()));
        }
        let rh = link_forward(&eh, exp.prior())?;
        rhs += exp.mass(k - 1, x) * f.bregman_generic(exp.ratios(x).values(), rh.values());
    }
    rhs *= exp.prior().pivot();
    let lhs = classification_regret(rule, exp, &eta_hat)?;
    Ok((lhs - rhs).abs())
}

/// `f⊛((u+v)/2) - (f⊛(u) + f⊛(v))/2`; nonpositive for convex `f⊛`.
pub fn perspective_midpoint_gap<F: ReducedConvex + Clone>(f: &F, u: &[f64], v: &[f64]) -> f64 {
    let p = Perspective { base: f.clone() };
    let mid: Vec<f64> = u.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect();
    p.value(&mid) - 0.5 * (p.value(u) + p.value(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Tolerance for identity residuals.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Tolerance for the variational/loss duality.
pub const DUALITY_TOL: f64 = 1e-12;

/// Tolerance for the midpoint-convexity gap.
pub const CONVEXITY_TOL: f64 = 1e-12;

fn random_positive(rng: &mut StreamRng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect()
}

fn random_simplex(rng: &mut StreamRng, k: usize) -> ProbabilityVector {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    ProbabilityVector::normalized(&w).expect("positive weights")
}

fn verifier_objectives(k: usize, prior: &Prior) -> Result<Vec<ConvexObjective>> {
    Ok(vec![
        ConvexObjective::multi_lr(prior.clone())?,
        ConvexObjective::lsif(k)?,
        ConvexObjective::kliep(k)?,
        ConvexObjective::power(k, 1.5)?,
        ConvexObjective::quadratic_default(k)?,
        ConvexObjective::log_sum_exp(k, 5.0)?,
    ])
}

struct Tracker {
    name: String,
    trials: usize,
    max: f64,
    tol: f64,
}

impl Tracker {
    fn new(name: String, tol: f64) -> Self {
        Self { name, trials: 0, max: 0.0, tol }
    }

    fn push(&mut self, residual: f64) {
        self.trials += 1;
        self.max = if residual.is_nan() { f64::NAN } else { self.max.max(residual) };
    }

    fn finish(self) -> CheckResult {
        let passed = self.max <= self.tol;
        CheckResult { name: self.name, trials: self.trials, max_residual: self.max, tolerance: self.tol, passed }
    }
}

/// Random log-linear model and Gaussian-ish dataset for the duality check.
fn random_model_and_data(rng: &mut StreamRng, k: usize) -> Result<(RatioModel, GroupedDataset)> {
    use crate::models::{Architecture, FeatureMap, DEFAULT_CLAMP};
    let d = 2;
    let arch = Architecture::LogLinear { features: FeatureMap::Identity { dim: d }, outputs: k - 1 };
    let params = (0..(k - 1) * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = RatioModel::new(arch, DEFAULT_CLAMP, params)?;
    let groups = (0..k)
        .map(|_| (0..8).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
        .collect();
    Ok((model, GroupedDataset::new(groups)?))
}

/// Run every verifier on `trials` random instances drawn from `seed`.
pub fn verify_theory(seed: u64, trials: usize) -> Result<TheoryReport> {
    let mut rng = rng::stream(seed, "verify-theory");
    let mut checks = Vec::new();
    for k in [2usize, 3, 5] {
        let uniform = Prior::uniform(k);
        for obj in verifier_objectives(k, &uniform)? {
            let label = format!("{} k={k}", obj.name());
            let mut ident = Tracker::new(format!("bregman identity, {label}"), IDENTITY_TOL);
            let mut conv = Tracker::new(format!("perspective convexity, {label}"), CONVEXITY_TOL);
            let mut prior_check = Tracker::new(format!("prior identity, {label}"), IDENTITY_TOL);
            let mut dual = Tracker::new(format!("variational equals negative loss, {label}"), DUALITY_TOL);
            for _ in 0..trials {
                let u = random_positive(&mut rng, k - 1);
                let v = random_positive(&mut rng, k - 1);
                ident.push(verify_bregman_identity(&obj, &u, &v)?);
                conv.push(perspective_midpoint_gap(&obj, &u, &v).max(0.0));
                let prior = Prior::new(random_simplex(&mut rng, k).values().to_vec())?;
                let eta = random_simplex(&mut rng, k);
                let eta_hat = random_simplex(&mut rng, k);
                prior_check.push(verify_prior_identity(&obj, &eta, &eta_hat, &prior)?);
            }
            for _ in 0..trials.div_ceil(10) {
                let (model, data) = random_model_and_data(&mut rng, k)?;
                dual.push(verify_variational_identity(&obj, &model, &data)?);
            }
            checks.extend([ident.finish(), conv.finish(), prior_check.finish(), dual.finish()]);
        }
        for rule in [ScoringRule::Log, ScoringRule::Brier] {
            let f = NegEntropy::new(rule, k)?;
            let mut prior_check = Tracker::new(format!("prior identity, {} entropy k={k}", rule.name()), IDENTITY_TOL);
            for _ in 0..trials {
                let prior = Prior::new(random_simplex(&mut rng, k).values().to_vec())?;
                let eta = random_simplex(&mut rng, k);
                let eta_hat = random_simplex(&mut rng, k);
                prior_check.push(verify_prior_identity(&f, &eta, &eta_hat, &prior)?);
            }
            checks.push(prior_check.finish());
        }
    }
    for k in [2usize, 3] {
        let fixed = if k == 2 { Prior::new(vec![0.4, 0.6])? } else { Prior::new(vec![0.2, 0.3, 0.5])? };
        for rule in [ScoringRule::Log, ScoringRule::Brier] {
            for prior in [Prior::uniform(k), fixed.clone()] {
                for m in [2usize, 3] {
                    let mut reg = Tracker::new(
                        format!("regret identity, {} k={k} m={m} prior={:?}", rule.name(), prior.weights()),
                        IDENTITY_TOL,
                    );
                    for _ in 0..trials {
                        let exp = DiscreteExperiment::random(prior.clone(), m, &mut rng)?;
                        let preds: Vec<ProbabilityVector> = (0..m).map(|_| random_simplex(&mut rng, k)).collect();
                        reg.push(verify_regret_identity(&rule, &exp, |x| preds[x].clone())?);
                    }
                    checks.push(reg.finish());
                }
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(TheoryReport { seed, checks, passed })
}

/// `|fdiv_variational(f) + dre_loss(f̃)|` over the full dataset.
pub fn verify_variational_identity(obj: &ConvexObjective, model: &RatioModel, dataset: &GroupedDataset) -> Result<f64> {
    let var = fdiv_variational(obj, model, dataset)?;
    let loss = dre_loss_model(&obj.normalized(), model, dataset, &Minibatch::full(dataset))?;
    Ok((var + loss).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_square_identity_by_hand() {
        // f(t) = t², u = 2, v = 1: LHS = (2/3 - 1/2)² = 1/36.
        let f = ConvexObjective::power(2, 2.0).unwrap();
        let lhs = f.bregman(&[2.0 / 3.0], &[0.5]);
        assert!((lhs - 1.0 / 36.0).abs() < 1e-15);
        // f⊛(u) = u² / (1 + u); f⊛(2) = 4/3, f⊛(1) = 1/2, f⊛'(1) = 3/4.
        let p = Perspective { base: f.clone() };
        assert!((p.value(&[2.0]) - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.gradient(&[1.0])[0] - 0.75).abs() < 1e-15);
        assert!(verify_bregman_identity(&f, &[2.0], &[1.0]).unwrap() <= 1e-12);
    }

    #[test]
    fn identity_vanishes_at_equal_arguments() {
        let f = ConvexObjective::kliep(3).unwrap();
        assert_eq!(verify_bregman_identity(&f, &[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn perspective_gradient_matches_finite_differences() {
        let prior = Prior::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = PriorPerspective::new(ConvexObjective::kliep(3).unwrap(), &prior).unwrap();
        let r = [0.7, 1.9];
        let g = f.gradient(&r);
        for i in 0..2 {
            let h = 1e-6;
            let mut a = r;
            a[i] += h;
            let mut b = r;
            b[i] -= h;
            let fd = (f.value(&a) - f.value(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{fd} vs {}", g[i]);
        }
        let e = NegEntropy::new(ScoringRule::Log, 3).unwrap();
        let p = [0.2, 0.5];
        let g = e.gradient(&p);
        let fd = (e.value(&[0.2 + 1e-6, 0.5]) - e.value(&[0.2 - 1e-6, 0.5])) / 2e-6;
        assert!((fd - g[0]).abs() < 1e-8);
    }

    #[test]
    fn regret_identity_examples() {
        let exp = DiscreteExperiment::new(Prior::uniform(2), vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let preds = [pv(&[0.6, 0.4]), pv(&[0.35, 0.65])];
        assert!(verify_regret_identity(&ScoringRule::Log, &exp, |x| preds[x].clone()).unwrap() <= 1e-10);
        assert!(verify_regret_identity(&ScoringRule::Log, &exp, |x| exp.eta(x)).unwrap() <= 1e-15);
        assert!(classification_regret(&ScoringRule::Log, &exp, |x| preds[x].clone()).unwrap() > 0.0);

        let exp = DiscreteExperiment::new(
            Prior::new(vec![0.2, 0.3, 0.5]).unwrap(),
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4]],
        )
        .unwrap();
        let preds = [pv(&[0.3, 0.3, 0.4]), pv(&[0.1, 0.5, 0.4]), pv(&[0.25, 0.25, 0.5])];
        assert!(verify_regret_identity(&ScoringRule::Brier, &exp, |x| preds[x].clone()).unwrap() <= 1e-10);
        assert!(verify_regret_identity(&ScoringRule::PseudoSpherical { alpha: 2.0 }, &exp, |x| preds[x].clone()).is_err());
    }

    #[test]
    fn plugin_and_variational_agree_at_truth() {
        // P₁ = (0.75, 0.25), P₂ = (0.5, 0.5), LSIF: ½(0.5·0.25 + 0.5·0.25) = 0.125.
        let exp = DiscreteExperiment::new(Prior::uniform(2), vec![vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let lsif = ConvexObjective::lsif(2).unwrap();
        assert!((fdiv_exact(&lsif, &exp) - 0.125).abs() < 1e-15);
        for obj in verifier_objectives(2, &Prior::uniform(2)).unwrap() {
            let plug = fdiv_exact(&obj, &exp);
            let var = fdiv_variational_exact(&obj, &exp, |x| exp.ratios(x));
            assert!((plug - var).abs() < 1e-14, "{:?}", obj.name());
            let unit = fdiv_variational_exact(&obj, &exp, |_| RatioVector::ones(1));
            assert!(unit.abs() < 1e-15 && unit <= plug + 1e-15);
        }
    }

    #[test]
    fn plugin_vanishes_for_identical_distributions() {
        let pts: Vec<Point> = (0..10).map(|i| vec![i as f64]).collect();
        for obj in verifier_objectives(3, &Prior::uniform(3)).unwrap() {
            assert!(fdiv_plugin(&obj, |_| RatioVector::ones(2), &pts).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn verify_theory_passes() {
        let rep = verify_theory(7, 50).unwrap();
        for c in &rep.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(rep.passed);
    }
}
