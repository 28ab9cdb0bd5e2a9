//! First-order training of ratio models.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{estimate_prior, GroupedDataset, Minibatch, Prior};
use crate::error::{DreError, Result};
use crate::models::RatioModel;
use crate::objectives::{dre_loss_gradient, dre_loss_model, ConvexObjective};
use crate::rng::{self, streams, StreamRng};
use crate::scoring::{cpe_dre_loss, cpe_dre_loss_gradient, ScoringRule};

/// Losses beyond this magnitude abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Samples drawn from each group per step.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { method: Method::Adam, step_size: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, batch_size: 128, epochs: 200, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(DreError::InvalidParameter(format!("step size must be > 0, got {}", self.step_size)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(DreError::InvalidParameter(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(DreError::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.batch_size == 0 {
            return Err(DreError::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which loss to minimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "lowercase")]
pub enum LossSpec {
    Bregman { objective: ConvexObjective },
    /// `prior: None` weights groups by their empirical sizes.
    Scoring { rule: ScoringRule, prior: Option<Prior> },
}

impl LossSpec {
    pub fn bregman(objective: ConvexObjective) -> Self {
        LossSpec::Bregman { objective }
    }

    pub fn scoring(rule: ScoringRule) -> Self {
        LossSpec::Scoring { rule, prior: None }
    }

    /// Fix the prior of a scoring loss against `dataset`.
    pub fn resolve(&self, dataset: &GroupedDataset) -> Result<LossSpec> {
        match self {
            LossSpec::Scoring { rule, prior: None } => {
                Ok(LossSpec::Scoring { rule: *rule, prior: Some(estimate_prior(dataset)?) })
            }
            other => Ok(other.clone()),
        }
    }

    pub fn loss(&self, model: &RatioModel, dataset: &GroupedDataset, batch: &Minibatch) -> Result<f64> {
        match self {
            LossSpec::Bregman { objective } => dre_loss_model(objective, model, dataset, batch),
            LossSpec::Scoring { rule, prior } => cpe_dre_loss(rule, model, dataset, &self.prior_or(prior, dataset)?, batch),
        }
    }

    pub fn loss_and_gradient(
        &self,
        model: &RatioModel,
        dataset: &GroupedDataset,
        batch: &Minibatch,
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            LossSpec::Bregman { objective } => dre_loss_gradient(objective, model, dataset, batch),
            LossSpec::Scoring { rule, prior } => {
                cpe_dre_loss_gradient(rule, model, dataset, &self.prior_or(prior, dataset)?, batch)
            }
        }
    }

    fn prior_or(&self, prior: &Option<Prior>, dataset: &GroupedDataset) -> Result<Prior> {
        match prior {
            Some(p) => Ok(p.clone()),
            None => estimate_prior(dataset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-dataset loss after each epoch.
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub steps: usize,
    /// Seconds; not serialized so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Per-group index stream: without replacement within a pass, reshuffled
/// whenever the group is exhausted.
struct GroupSampler {
    perm: Vec<usize>,
    pos: usize,
}

impl GroupSampler {
    fn new(n: usize) -> Self {
        Self { perm: (0..n).collect(), pos: 0 }
    }

    fn reshuffle(&mut self, rng: &mut StreamRng) {
        self.perm.shuffle(rng);
        self.pos = 0;
    }

    fn take(&mut self, want: usize, rng: &mut StreamRng) -> Vec<usize> {
        if self.pos >= self.perm.len() {
            self.reshuffle(rng);
        }
        let end = (self.pos + want.min(self.perm.len())).min(self.perm.len());
        let out = self.perm[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn check_loss(step: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
        return Err(DreError::NumericalAbort { step, loss });
    }
    Ok(())
}

/// Minimize `loss` over the model parameters.
pub fn train(loss: &LossSpec, model: RatioModel, dataset: &GroupedDataset, cfg: &OptimizerConfig) -> Result<(RatioModel, TrainReport)> {
    train_with_callback(loss, model, dataset, cfg, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, loss)` after every epoch.
pub fn train_with_callback(
    loss: &LossSpec,
    mut model: RatioModel,
    dataset: &GroupedDataset,
    cfg: &OptimizerConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(RatioModel, TrainReport)> {
    let start = Instant::now();
    cfg.validate()?;
    if model.output_dim() + 1 != dataset.k() {
        return Err(DreError::DimensionMismatch { expected: dataset.k() - 1, got: model.output_dim() });
    }
    if model.input_dim() != dataset.dim() {
        return Err(DreError::DimensionMismatch { expected: dataset.dim(), got: model.input_dim() });
    }
    let loss = loss.resolve(dataset)?;
    let full = Minibatch::full(dataset);
    let sizes = dataset.sizes();
    let n_max = *sizes.iter().max().unwrap();
    let steps_per_epoch = n_max.div_ceil(cfg.batch_size);
    let mut rng = rng::stream(cfg.seed, streams::SHUFFLE);
    let mut samplers: Vec<GroupSampler> = sizes.iter().map(|&n| GroupSampler::new(n)).collect();
    let p = model.n_params();
    let mut adam = Adam { m: vec![0.0; p], v: vec![0.0; p], t: 0 };
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;

    for epoch in 0..cfg.epochs {
        samplers.iter_mut().for_each(|s| s.reshuffle(&mut rng));
        for _ in 0..steps_per_epoch {
            let batch = Minibatch { indices: samplers.iter_mut().map(|s| s.take(cfg.batch_size, &mut rng)).collect() };
            let (value, grad) = loss.loss_and_gradient(&model, dataset, &batch)?;
            check_loss(steps, value)?;
            apply_step(cfg, &mut adam, model.params_mut(), &grad);
            steps += 1;
        }
        let epoch_loss = loss.loss(&model, dataset, &full)?;
        check_loss(steps, epoch_loss)?;
        history.push(epoch_loss);
        on_epoch(epoch, epoch_loss);
    }
    let final_loss = match history.last() {
        Some(&l) => l,
        None => loss.loss(&model, dataset, &full)?,
    };
    let report = TrainReport { loss_history: history, final_loss, steps, wall_time: start.elapsed().as_secs_f64() };
    Ok((model, report))
}

fn apply_step(cfg: &OptimizerConfig, adam: &mut Adam, params: &mut [f64], grad: &[f64]) {
    match cfg.method {
        Method::Sgd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= cfg.step_size * g;
            }
        }
        Method::Adam => {
            adam.t += 1;
            let c1 = 1.0 - cfg.beta1.powi(adam.t);
            let c2 = 1.0 - cfg.beta2.powi(adam.t);
            for i in 0..params.len() {
                adam.m[i] = cfg.beta1 * adam.m[i] + (1.0 - cfg.beta1) * grad[i];
                adam.v[i] = cfg.beta2 * adam.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                let mh = adam.m[i] / c1;
                let vh = adam.v[i] / c2;
                params[i] -= cfg.step_size * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Relative error `|a - n| / max(|a|, |n|, floor)` used by gradient checks.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Denominator floor for [`gradient_check`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Largest per-sample count used by [`gradient_check`].
pub const GRAD_CHECK_BATCH: usize = 64;

/// Maximum relative error between the analytic gradient and central
/// differences over every parameter, on the first [`GRAD_CHECK_BATCH`]
/// samples of each group.
pub fn gradient_check(loss: &LossSpec, model: &RatioModel, dataset: &GroupedDataset, epsilon: f64) -> Result<f64> {
    let loss = loss.resolve(dataset)?;
    let batch = Minibatch {
        indices: dataset.sizes().iter().map(|&n| (0..n.min(GRAD_CHECK_BATCH)).collect()).collect(),
    };
    let (_, grad) = loss.loss_and_gradient(model, dataset, &batch)?;
    gradient_check_against(&grad, model, epsilon, |m| loss.loss(m, dataset, &batch))
}

/// Compare a supplied gradient with central differences of `value`.
pub fn gradient_check_against(
    grad: &[f64],
    model: &RatioModel,
    epsilon: f64,
    value: impl Fn(&RatioModel) -> Result<f64>,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(DreError::InvalidParameter(format!("epsilon must lie in (0, 1e-2], got {epsilon}")));
    }
    if grad.len() != model.n_params() {
        return Err(DreError::DimensionMismatch { expected: model.n_params(), got: grad.len() });
    }
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (p, &a) in grad.iter().enumerate() {
        let orig = probe.params()[p];
        probe.params_mut()[p] = orig + epsilon;
        let up = value(&probe)?;
        probe.params_mut()[p] = orig - epsilon;
        let down = value(&probe)?;
        probe.params_mut()[p] = orig;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * epsilon), GRAD_CHECK_FLOOR));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, FeatureMap, ModelSpec};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_groups(means: &[f64], n: usize, seed: u64) -> GroupedDataset {
        let mut rng = rng::stream(seed, "test-data");
        GroupedDataset::new(
            means
                .iter()
                .map(|&m| {
                    let d = Normal::new(m, 1.0).unwrap();
                    (0..n).map(|_| vec![d.sample(&mut rng)]).collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_is_noop() {
        let ds = gaussian_groups(&[0.0, 1.0], 20, 1);
        let m = init_model(&ModelSpec::mlp(1, &[4], 1), 3).unwrap();
        let cfg = OptimizerConfig { epochs: 0, ..Default::default() };
        let (out, rep) = train(&LossSpec::bregman(ConvexObjective::lsif(2).unwrap()), m.clone(), &ds, &cfg).unwrap();
        assert_eq!(out, m);
        assert!(rep.loss_history.is_empty());
        assert_eq!(rep.steps, 0);
    }

    #[test]
    fn same_seed_same_history() {
        let ds = gaussian_groups(&[0.0, 1.0, -1.0], 50, 2);
        let spec = ModelSpec::mlp(1, &[8], 2);
        let cfg = OptimizerConfig { epochs: 5, batch_size: 16, step_size: 1e-2, seed: 4, ..Default::default() };
        let loss = LossSpec::scoring(ScoringRule::Brier);
        let a = train(&loss, init_model(&spec, 1).unwrap(), &ds, &cfg).unwrap();
        let b = train(&loss, init_model(&spec, 1).unwrap(), &ds, &cfg).unwrap();
        assert_eq!(a.1.loss_history, b.1.loss_history);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.loss_history.len(), 5);
        assert_eq!(a.1.steps, 5 * 4);
    }

    #[test]
    fn lsif_same_distribution_learns_unit_ratio() {
        let ds = gaussian_groups(&[0.0, 0.0], 2000, 5);
        let m = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 1 }, 1), 0).unwrap();
        let cfg = OptimizerConfig { epochs: 30, batch_size: 128, step_size: 1e-2, ..Default::default() };
        let (m, _) = train(&LossSpec::bregman(ConvexObjective::lsif(2).unwrap()), m, &ds, &cfg).unwrap();
        let held = gaussian_groups(&[0.0, 0.0], 500, 99);
        let mut dev: Vec<f64> = held.group(0).iter().map(|x| (m.eval(x).unwrap().values()[0] - 1.0).abs()).collect();
        dev.sort_by(f64::total_cmp);
        assert!(dev[dev.len() / 2] <= 0.1, "median deviation {}", dev[dev.len() / 2]);
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let means = crate::bench::default_means(2, 5, false).unwrap();
        let ds = crate::bench::GaussianSpec { dim: 2, means, n_per_group: 300, seed: 8 }.sample().unwrap();
        let cfg = OptimizerConfig { method: Method::Sgd, epochs: 40, batch_size: 300, step_size: 1e-3, ..Default::default() };
        for obj in [
            ConvexObjective::lsif(5).unwrap(),
            ConvexObjective::kliep(5).unwrap(),
            ConvexObjective::multi_lr_uniform(5).unwrap(),
        ] {
            let m = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 2 }, 4), 0).unwrap();
            let (_, rep) = train(&LossSpec::bregman(obj), m, &ds, &cfg).unwrap();
            for w in rep.loss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn divergence_aborts() {
        let ds = gaussian_groups(&[0.0, 3.0], 50, 6);
        let m = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 1 }, 1), 0).unwrap();
        let cfg = OptimizerConfig { method: Method::Sgd, epochs: 50, step_size: 1e6, ..Default::default() };
        let err = train(&LossSpec::bregman(ConvexObjective::lsif(2).unwrap()), m, &ds, &cfg).unwrap_err();
        assert!(matches!(err, DreError::NumericalAbort { .. }), "{err}");
    }

    #[test]
    fn gradient_checks() {
        let ds = gaussian_groups(&[0.0, 1.0, 2.0], 30, 7);
        let mut ll = init_model(&ModelSpec::log_linear(FeatureMap::Polynomial { dim: 1, degree: 2 }, 2), 0).unwrap();
        let mut rng = rng::stream(1, "test");
        ll.params_mut().iter_mut().for_each(|p| *p = rng.random_range(-0.3..0.3));
        let lsif = LossSpec::bregman(ConvexObjective::lsif(3).unwrap());
        assert!(gradient_check(&lsif, &ll, &ds, 1e-6).unwrap() <= 1e-6);
        let mut mlp = init_model(&ModelSpec::mlp(1, &[6, 5], 2), 2).unwrap();
        mlp.params_mut().iter_mut().for_each(|p| *p = rng.random_range(-0.5..0.5));
        let lr = LossSpec::bregman(ConvexObjective::multi_lr_uniform(3).unwrap());
        assert!(gradient_check(&lr, &mlp, &ds, 1e-6).unwrap() <= 1e-4);
        // Negative control: a corrupted gradient must be flagged.
        let batch = Minibatch { indices: vec![(0..30).collect(); 3] };
        let (_, mut g) = lr.loss_and_gradient(&mlp, &ds, &batch).unwrap();
        g[0] += 1.0;
        let err = gradient_check_against(&g, &mlp, 1e-6, |m| lr.loss(m, &ds, &batch)).unwrap();
        assert!(err > 1e-2);
        assert!(gradient_check(&lr, &mlp, &ds, 0.1).is_err());
    }

    #[test]
    fn unequal_groups_cycle() {
        let ds = GroupedDataset::new(vec![
            (0..10).map(|i| vec![i as f64 / 10.0]).collect(),
            (0..3).map(|i| vec![i as f64]).collect(),
        ])
        .unwrap();
        let mut rng = rng::stream(0, "t");
        let mut s = GroupSampler::new(3);
        s.reshuffle(&mut rng);
        let a = s.take(2, &mut rng);
        let b = s.take(2, &mut rng);
        assert_eq!(a.len() + b.len(), 3);
        assert_eq!(s.take(5, &mut rng).len(), 3);
        let m = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 1 }, 1), 0).unwrap();
        let cfg = OptimizerConfig { epochs: 2, batch_size: 4, ..Default::default() };
        let (_, rep) = train(&LossSpec::scoring(ScoringRule::Log), m, &ds, &cfg).unwrap();
        assert_eq!(rep.steps, 6);
    }
}
