//! Parametric ratio models `x ↦ r̂(x) ∈ R_+^{k-1}`.
//!
//! Both architectures produce a pre-activation `g(x) ∈ R^{k-1}` and output
//! `r̂_i(x) = exp(clamp(g_i(x), -L, L))`, so every output is positive and
//! bounded. Gradients flow through [`RatioModel::backward`], a hand-written
//! vector-Jacobian product; coordinates sitting on the clamp get zero gradient.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Point;
use crate::error::{DreError, Result};
use crate::link::RatioVector;
use crate::rng::{self, streams};

/// Default log-ratio clamp `L`.
pub const DEFAULT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    Identity { dim: usize },
    /// Per-coordinate powers `x_j^p`, `p = 1..=degree`, no cross terms.
    Polynomial { dim: usize, degree: usize },
    /// Gaussian bumps `exp(-‖x - c‖² / (2σ²))`, one per center.
    Rbf { centers: Vec<Point>, bandwidth: f64 },
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } | FeatureMap::Polynomial { dim, .. } => *dim,
            FeatureMap::Rbf { centers, .. } => centers.first().map_or(0, Vec::len),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::Polynomial { dim, degree } => dim * degree,
            FeatureMap::Rbf { centers, .. } => centers.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FeatureMap::Identity { dim } if *dim == 0 => {
                Err(DreError::InvalidParameter("identity features need dim >= 1".into()))
            }
            FeatureMap::Polynomial { dim, degree } if *dim == 0 || *degree == 0 => {
                Err(DreError::InvalidParameter("polynomial features need dim >= 1 and degree >= 1".into()))
            }
            FeatureMap::Rbf { centers, bandwidth } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(DreError::InvalidParameter(format!("rbf bandwidth must be > 0, got {bandwidth}")));
                }
                let d = self.input_dim();
                if centers.is_empty() || d == 0 || centers.iter().any(|c| c.len() != d) {
                    return Err(DreError::InvalidParameter(
                        "rbf centers must be nonempty and share one dimension".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity { .. } => x.to_vec(),
            FeatureMap::Polynomial { degree, .. } => {
                let mut out = Vec::with_capacity(x.len() * degree);
                let mut pw = x.to_vec();
                for p in 0..*degree {
                    if p > 0 {
                        pw.iter_mut().zip(x).for_each(|(a, b)| *a *= b);
                    }
                    out.extend_from_slice(&pw);
                }
                out
            }
            FeatureMap::Rbf { centers, bandwidth } => {
                let s = 2.0 * bandwidth * bandwidth;
                centers.iter().map(|c| (-sq_dist(x, c) / s).exp()).collect()
            }
        }
    }

    /// RBF features centered on up to `max_centers` pivot samples, with the
    /// median pairwise distance between centers as bandwidth.
    pub fn rbf_median_heuristic(pivot: &[Point], max_centers: usize, seed: u64) -> Result<Self> {
        if pivot.is_empty() {
            return Err(DreError::EmptySamples("no pivot samples for rbf centers".into()));
        }
        let n = max_centers.min(pivot.len()).max(1);
        let mut rng = rng::stream(seed, "rbf-centers");
        let mut idx = sample(&mut rng, pivot.len(), n).into_vec();
        idx.sort_unstable();
        let centers: Vec<Point> = idx.iter().map(|&i| pivot[i].clone()).collect();
        let mut dists = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                dists.push(sq_dist(&centers[i], &centers[j]).sqrt());
            }
        }
        let bandwidth = if dists.is_empty() {
            1.0
        } else {
            dists.sort_by(f64::total_cmp);
            let mid = dists.len() / 2;
            let med = if dists.len() % 2 == 0 { 0.5 * (dists[mid - 1] + dists[mid]) } else { dists[mid] };
            if med > 0.0 {
                med
            } else {
                1.0
            }
        };
        Ok(FeatureMap::Rbf { centers, bandwidth })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// `g = W φ(x) + b`; parameters are `W` (row-major, outputs × features)
    /// followed by `b`.
    LogLinear { features: FeatureMap, outputs: usize },
    /// Rectifier MLP with layer widths `layers[0] = d, ..., layers.last() =
    /// k-1`; parameters are, per layer, `W` (row-major, out × in) then `b`.
    Mlp { layers: Vec<usize> },
}

impl Architecture {
    pub fn n_params(&self) -> usize {
        match self {
            Architecture::LogLinear { features, outputs } => outputs * (features.output_dim() + 1),
            Architecture::Mlp { layers } => layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::LogLinear { features, .. } => features.input_dim(),
            Architecture::Mlp { layers } => layers[0],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Architecture::LogLinear { outputs, .. } => *outputs,
            Architecture::Mlp { layers } => *layers.last().unwrap(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Architecture::LogLinear { features, outputs } => {
                features.validate()?;
                if *outputs == 0 {
                    return Err(DreError::InvalidParameter("model needs at least one output".into()));
                }
            }
            Architecture::Mlp { layers } => {
                if layers.len() < 2 || layers.contains(&0) {
                    return Err(DreError::InvalidParameter(format!("bad mlp layer sizes {layers:?}")));
                }
            }
        }
        Ok(())
    }
}

/// What to build; resolved into an [`Architecture`] once data dimensions are
/// known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub clamp: f64,
}

impl ModelSpec {
    pub fn log_linear(features: FeatureMap, outputs: usize) -> Self {
        Self { architecture: Architecture::LogLinear { features, outputs }, clamp: DEFAULT_CLAMP }
    }

    /// `d -> hidden... -> outputs` rectifier network.
    pub fn mlp(input_dim: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut layers = vec![input_dim];
        layers.extend_from_slice(hidden);
        layers.push(outputs);
        Self { architecture: Architecture::Mlp { layers }, clamp: DEFAULT_CLAMP }
    }

    /// Two hidden layers of width 32.
    pub fn mlp_default(input_dim: usize, outputs: usize) -> Self {
        Self::mlp(input_dim, &[32, 32], outputs)
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = clamp;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Loglinear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Identity,
    Poly,
    Rbf,
}

/// Largest number of RBF centers drawn from the pivot group.
pub const MAX_RBF_CENTERS: usize = 100;

/// A model description that is resolved against a dataset (for its
/// dimensions and, with RBF features, its pivot samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub kind: ModelKind,
    pub features: FeatureKind,
    /// Polynomial degree.
    pub degree: usize,
    /// MLP hidden widths.
    pub hidden: Vec<usize>,
    pub clamp: f64,
}

impl Default for ModelChoice {
    fn default() -> Self {
        Self { kind: ModelKind::Loglinear, features: FeatureKind::Identity, degree: 2, hidden: vec![32, 32], clamp: DEFAULT_CLAMP }
    }
}

impl ModelChoice {
    pub fn spec(&self, dataset: &crate::data::GroupedDataset, seed: u64) -> Result<ModelSpec> {
        let (d, out) = (dataset.dim(), dataset.k() - 1);
        let spec = match self.kind {
            ModelKind::Mlp => ModelSpec::mlp(d, &self.hidden, out),
            ModelKind::Loglinear => {
                let features = match self.features {
                    FeatureKind::Identity => FeatureMap::Identity { dim: d },
                    FeatureKind::Poly => FeatureMap::Polynomial { dim: d, degree: self.degree },
                    FeatureKind::Rbf => FeatureMap::rbf_median_heuristic(dataset.pivot(), MAX_RBF_CENTERS, seed)?,
                };
                ModelSpec::log_linear(features, out)
            }
        };
        Ok(spec.with_clamp(self.clamp))
    }

    /// Resolve and initialize.
    pub fn build(&self, dataset: &crate::data::GroupedDataset, seed: u64) -> Result<RatioModel> {
        init_model(&self.spec(dataset, seed)?, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    architecture: Architecture,
    clamp: f64,
    params: Vec<f64>,
}

/// Cached forward pass, consumed by [`RatioModel::backward`].
#[derive(Debug, Clone)]
pub struct Forward {
    ratios: Vec<f64>,
    active: Vec<bool>,
    cache: Cache,
}

#[derive(Debug, Clone)]
enum Cache {
    LogLinear { phi: Vec<f64> },
    /// `acts[0]` is the input, `acts[l]` the post-rectifier output of hidden
    /// layer `l`.
    Mlp { acts: Vec<Vec<f64>> },
}

impl Forward {
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn into_ratio_vector(self) -> RatioVector {
        RatioVector::from_trusted(self.ratios)
    }
}

/// Deterministic initialization: log-linear models start at zero (`r̂ ≡ 1`);
/// MLPs draw hidden weights from `U(-1/√fan_in, 1/√fan_in)` and zero the
/// final layer, which also gives `r̂ ≡ 1`.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<RatioModel> {
    spec.architecture.validate()?;
    let n = spec.architecture.n_params();
    let mut params = vec![0.0; n];
    if let Architecture::Mlp { layers } = &spec.architecture {
        let mut rng = rng::stream(seed, streams::INIT);
        let mut off = 0;
        let last = layers.len() - 2;
        for (l, w) in layers.windows(2).enumerate() {
            let count = w[1] * (w[0] + 1);
            if l < last {
                let bound = 1.0 / (w[0] as f64).sqrt();
                for p in &mut params[off..off + count] {
                    *p = rng.random_range(-bound..bound);
                }
            }
            off += count;
        }
    }
    RatioModel::new(spec.architecture.clone(), spec.clamp, params)
}

impl RatioModel {
    pub fn new(architecture: Architecture, clamp: f64, params: Vec<f64>) -> Result<Self> {
        architecture.validate()?;
        if !(clamp.is_finite() && clamp > 0.0) {
            return Err(DreError::InvalidParameter(format!("clamp must be > 0, got {clamp}")));
        }
        if params.len() != architecture.n_params() {
            return Err(DreError::DimensionMismatch { expected: architecture.n_params(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(DreError::InvalidParameter("model parameters must be finite".into()));
        }
        Ok(Self { architecture, clamp, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    /// `k - 1`.
    pub fn output_dim(&self) -> usize {
        self.architecture.output_dim()
    }

    /// Pre-activation `g(x)` before clamping.
    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_raw(x)?.0)
    }

    fn forward_raw(&self, x: &[f64]) -> Result<(Vec<f64>, Cache)> {
        if x.len() != self.input_dim() {
            return Err(DreError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        match &self.architecture {
            Architecture::LogLinear { features, outputs } => {
                let phi = features.apply(x);
                let nf = phi.len();
                let (w, b) = self.params.split_at(outputs * nf);
                let g = (0..*outputs)
                    .map(|i| b[i] + w[i * nf..(i + 1) * nf].iter().zip(&phi).map(|(a, c)| a * c).sum::<f64>())
                    .collect();
                Ok((g, Cache::LogLinear { phi }))
            }
            Architecture::Mlp { layers } => {
                let mut acts = vec![x.to_vec()];
                let mut off = 0;
                let n_layers = layers.len() - 1;
                let mut out = Vec::new();
                for (l, w) in layers.windows(2).enumerate() {
                    let (n_in, n_out) = (w[0], w[1]);
                    let wts = &self.params[off..off + n_out * n_in];
                    let bias = &self.params[off + n_out * n_in..off + n_out * (n_in + 1)];
                    off += n_out * (n_in + 1);
                    let a = acts.last().unwrap();
                    let z: Vec<f64> = (0..n_out)
                        .map(|o| bias[o] + wts[o * n_in..(o + 1) * n_in].iter().zip(a).map(|(p, q)| p * q).sum::<f64>())
                        .collect();
                    if l + 1 < n_layers {
                        acts.push(z.into_iter().map(|v| v.max(0.0)).collect());
                    } else {
                        out = z;
                    }
                }
                Ok((out, Cache::Mlp { acts }))
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let (g, cache) = self.forward_raw(x)?;
        let l = self.clamp;
        let active = g.iter().map(|&v| (-l..=l).contains(&v)).collect();
        let ratios = g.iter().map(|&v| v.clamp(-l, l).exp()).collect();
        Ok(Forward { ratios, active, cache })
    }

    /// `r̂(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<RatioVector> {
        Ok(self.forward(x)?.into_ratio_vector())
    }

    /// Accumulate `J(x)ᵀ d` into `grad`, where `J = ∂r̂/∂θ`.
    pub fn backward(&self, fw: &Forward, d: &[f64], grad: &mut [f64]) {
        let dg: Vec<f64> = (0..fw.ratios.len())
            .map(|i| if fw.active[i] { d[i] * fw.ratios[i] } else { 0.0 })
            .collect();
        match (&self.architecture, &fw.cache) {
            (Architecture::LogLinear { outputs, .. }, Cache::LogLinear { phi }) => {
                let nf = phi.len();
                for i in 0..*outputs {
                    if dg[i] == 0.0 {
                        continue;
                    }
                    for (gw, p) in grad[i * nf..(i + 1) * nf].iter_mut().zip(phi) {
                        *gw += dg[i] * p;
                    }
                    grad[outputs * nf + i] += dg[i];
                }
            }
            (Architecture::Mlp { layers }, Cache::Mlp { acts }) => {
                let offsets: Vec<usize> = layers
                    .windows(2)
                    .scan(0, |off, w| {
                        let o = *off;
                        *off += w[1] * (w[0] + 1);
                        Some(o)
                    })
                    .collect();
                let mut delta = dg;
                for l in (0..layers.len() - 1).rev() {
                    let (n_in, n_out) = (layers[l], layers[l + 1]);
                    let off = offsets[l];
                    let a = &acts[l];
                    for o in 0..n_out {
                        if delta[o] == 0.0 {
                            continue;
                        }
                        for (gw, av) in grad[off + o * n_in..off + (o + 1) * n_in].iter_mut().zip(a) {
                            *gw += delta[o] * av;
                        }
                        grad[off + n_out * n_in + o] += delta[o];
                    }
                    if l > 0 {
                        let wts = &self.params[off..off + n_out * n_in];
                        delta = (0..n_in)
                            .map(|j| {
                                if a[j] > 0.0 {
                                    (0..n_out).map(|o| wts[o * n_in + j] * delta[o]).sum()
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                    }
                }
            }
            _ => unreachable!("forward cache does not match architecture"),
        }
    }

    /// Full Jacobian `∂r̂_i/∂θ_p`, row-major `(k-1) × P`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let fw = self.forward(x)?;
        let (m, p) = (self.output_dim(), self.n_params());
        let mut jac = vec![0.0; m * p];
        let mut e = vec![0.0; m];
        for i in 0..m {
            e.iter_mut().enumerate().for_each(|(j, v)| *v = if j == i { 1.0 } else { 0.0 });
            self.backward(&fw, &e, &mut jac[i * p..(i + 1) * p]);
        }
        Ok(jac)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and validate a checkpoint.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RatioModel = serde_json::from_str(s)?;
        Self::new(raw.architecture, raw.clamp, raw.params)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| DreError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| DreError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&s).map_err(|e| DreError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Evaluate `model` at every point.
pub fn model_eval_all(model: &RatioModel, points: &[Point]) -> Result<Vec<RatioVector>> {
    points.iter().map(|x| model.eval(x)).collect()
}
