//! Synthetic benchmarks with closed-form ground truth.
//!
//! The Gaussian benchmark draws `k` unit-covariance Gaussians and scores a
//! trained model by pairwise MAE on pooled held-out samples. The OOD
//! benchmark draws `k-1` one-dimensional components plus their mixture as the
//! pivot, and scores mixture samples by `r̂_i` against component membership.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::applications::{auroc, mae_report, weighted_auroc, MaeReport, OracleRatios, RatioSource};
use crate::data::{estimate_prior, GroupedDataset, Point};
use crate::error::{DreError, Result};
use crate::models::{FeatureKind, ModelChoice, RatioModel};
use crate::objectives::{ConvexObjective, ObjectiveName};
use crate::rng::{self, streams};
use crate::scoring::ScoringRule;
use crate::training::{train, LossSpec, OptimizerConfig};

/// The five-mean family: `(1,0,…)`, `(-1,0,…)`, `(0,1,…)`, `(0,-1,…)` and a
/// fifth mean equal to the first. `fix_mean5` replaces the fifth with
/// `(0,0,1,…)` (or `(0,0)` when `dim = 2`).
pub fn default_means(dim: usize, k: usize, fix_mean5: bool) -> Result<Vec<Point>> {
    if k != 5 {
        return Err(DreError::InvalidParameter(format!("only the k = 5 mean family is predefined, got k = {k}")));
    }
    if dim < 2 {
        return Err(DreError::InvalidParameter(format!("the default means need dim >= 2, got {dim}")));
    }
    let e = |i: usize, s: f64| -> Point {
        let mut v = vec![0.0; dim];
        if i < dim {
            v[i] = s;
        }
        v
    };
    let fifth = if fix_mean5 { e(2, 1.0) } else { e(0, 1.0) };
    Ok(vec![e(0, 1.0), e(0, -1.0), e(1, 1.0), e(1, -1.0), fifth])
}

/// `N(μ_i, I)(x) / N(μ_j, I)(x) = exp(xᵀ(μ_i-μ_j) - (‖μ_i‖² - ‖μ_j‖²)/2)`.
pub fn true_gaussian_ratio(mu_i: &[f64], mu_j: &[f64], x: &[f64]) -> f64 {
    log_gaussian_ratio(mu_i, mu_j, x).exp()
}

fn log_gaussian_ratio(mu_i: &[f64], mu_j: &[f64], x: &[f64]) -> f64 {
    let mut v = 0.0;
    for ((a, b), xv) in mu_i.iter().zip(mu_j).zip(x) {
        v += xv * (a - b) - 0.5 * (a * a - b * b);
    }
    v
}

/// Canonical true ratios `p_i/p_k` for unit Gaussians.
pub fn gaussian_ratios(means: &[Point], x: &[f64]) -> Vec<f64> {
    let pivot = &means[means.len() - 1];
    means[..means.len() - 1].iter().map(|m| true_gaussian_ratio(m, pivot, x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub dim: usize,
    pub means: Vec<Point>,
    pub n_per_group: usize,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.means.len() < 2 || self.dim == 0 || self.n_per_group == 0 {
            return Err(DreError::InvalidParameter("need k >= 2 means, dim >= 1 and n >= 1".into()));
        }
        if self.means.iter().any(|m| m.len() != self.dim) {
            return Err(DreError::InvalidParameter("every mean must have length dim".into()));
        }
        Ok(())
    }

    /// One group per mean, drawn from the `sampling` stream of `seed`.
    pub fn sample(&self) -> Result<GroupedDataset> {
        self.validate()?;
        let mut rng = rng::stream(self.seed, streams::SAMPLING);
        let groups = self
            .means
            .iter()
            .map(|mu| {
                (0..self.n_per_group)
                    .map(|_| mu.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect())
                    .collect()
            })
            .collect();
        GroupedDataset::new(groups)
    }
}

/// A benchmark entry: untrained baseline, ground truth, or a trained loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum BenchMethod {
    RandomInit,
    Oracle,
    Objective { objective: ObjectiveName },
    Rule { rule: ScoringRule },
}

impl BenchMethod {
    /// Every trainable method plus the untrained baseline.
    pub fn table() -> Vec<BenchMethod> {
        let mut out = vec![BenchMethod::RandomInit];
        out.extend(ObjectiveName::ALL.iter().map(|&objective| BenchMethod::Objective { objective }));
        out.push(BenchMethod::Rule { rule: ScoringRule::Brier });
        out.push(BenchMethod::Rule { rule: ScoringRule::PseudoSpherical { alpha: crate::scoring::DEFAULT_PS_ALPHA } });
        out
    }

    pub fn label(&self) -> String {
        match self {
            BenchMethod::RandomInit => "Random Init".into(),
            BenchMethod::Oracle => "Oracle".into(),
            BenchMethod::Objective { objective } => match objective {
                ObjectiveName::MultiLr => "Multi-LR".into(),
                ObjectiveName::Lsif => "Multi-LSIF".into(),
                ObjectiveName::Kliep => "Multi-KLIEP".into(),
                ObjectiveName::Power => "Power".into(),
                ObjectiveName::Quadratic => "Quadratic".into(),
                ObjectiveName::LogSumExp => "LogSumExp".into(),
            },
            BenchMethod::Rule { rule } => match rule {
                ScoringRule::Log => "Log".into(),
                ScoringRule::Brier => "Brier".into(),
                ScoringRule::PseudoSpherical { .. } => "Spherical".into(),
            },
        }
    }

    /// The loss to train with, or `None` for untrained/oracle entries.
    pub fn loss(&self, dataset: &GroupedDataset) -> Result<Option<LossSpec>> {
        let k = dataset.k();
        Ok(match *self {
            BenchMethod::RandomInit | BenchMethod::Oracle => None,
            BenchMethod::Objective { objective } => {
                let prior = (objective == ObjectiveName::MultiLr).then(|| estimate_prior(dataset)).transpose()?;
                Some(LossSpec::bregman(ConvexObjective::from_name(objective, k, None, prior)?))
            }
            BenchMethod::Rule { rule } => Some(LossSpec::scoring(rule)),
        })
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for BenchMethod {
    type Err = DreError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        match key.as_str() {
            "randominit" | "random" | "init" => Ok(BenchMethod::RandomInit),
            "oracle" | "truth" => Ok(BenchMethod::Oracle),
            "brier" => Ok(BenchMethod::Rule { rule: ScoringRule::Brier }),
            "log" => Ok(BenchMethod::Rule { rule: ScoringRule::Log }),
            "spherical" | "pseudospherical" => Ok(BenchMethod::Rule { rule: ScoringRule::from_name("pseudospherical", None)? }),
            _ => {
                let stripped = key.strip_prefix("multi").unwrap_or(&key);
                Ok(BenchMethod::Objective { objective: stripped.parse()? })
            }
        }
    }
}

/// Run `f` over `jobs` on up to `threads` worker threads; results keep the
/// input order.
pub fn run_jobs<J: Sync, T: Send>(jobs: &[J], threads: usize, f: impl Fn(&J) -> Result<T> + Sync) -> Result<Vec<T>> {
    let threads = threads.max(1).min(jobs.len().max(1));
    if threads == 1 {
        return jobs.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<T>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= jobs.len() {
                            break;
                        }
                        done.push((i, f(&jobs[i])));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("benchmark worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBenchConfig {
    pub dims: Vec<usize>,
    pub k: usize,
    pub fix_mean5: bool,
    pub n_train: usize,
    pub n_eval: usize,
    pub seeds: usize,
    pub seed: u64,
    pub methods: Vec<BenchMethod>,
    pub model: ModelChoice,
    pub optimizer: OptimizerConfig,
}

impl Default for GaussianBenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 5, 10],
            k: 5,
            fix_mean5: false,
            n_train: 2000,
            n_eval: 1000,
            seeds: 3,
            seed: 0,
            methods: BenchMethod::table(),
            model: ModelChoice::default(),
            optimizer: OptimizerConfig { step_size: 1e-2, epochs: 200, ..OptimizerConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub method: String,
    pub dim: usize,
    /// Statistics over the seeds that trained without a numerical abort;
    /// `None` when every seed aborted.
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub clipped_mae_mean: Option<f64>,
    pub log_mae_mean: Option<f64>,
    /// Seeds whose training aborted.
    pub diverged: usize,
    /// One entry per seed; `None` marks an aborted run.
    pub per_seed: Vec<Option<MaeReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub config: GaussianBenchConfig,
    /// `"verbatim"` (fifth mean equals the first) or `"fixed"`.
    pub mean_family: String,
    /// Evaluation distribution for the MAE.
    pub eval_distribution: String,
    pub rows: Vec<GaussianRow>,
}

/// Sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn trained_or_unit(
    method: &BenchMethod,
    choice: &ModelChoice,
    data: &GroupedDataset,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<RatioModel> {
    let model = choice.build(data, seed)?;
    match method.loss(data)? {
        Some(loss) => Ok(train(&loss, model, data, &OptimizerConfig { seed, ..opt.clone() })?.0),
        None => Ok(model),
    }
}

/// Train every method on every `(dim, seed)` pair and report pooled
/// held-out MAE, mean ± std over seeds.
pub fn run_gaussian_benchmark(cfg: &GaussianBenchConfig, jobs: usize) -> Result<GaussianReport> {
    if cfg.seeds == 0 || cfg.dims.is_empty() || cfg.methods.is_empty() {
        return Err(DreError::InvalidParameter("need at least one seed, dim and method".into()));
    }
    let mut tasks = Vec::new();
    for (mi, _) in cfg.methods.iter().enumerate() {
        for &dim in &cfg.dims {
            for s in 0..cfg.seeds {
                tasks.push((mi, dim, s));
            }
        }
    }
    let results = run_jobs(&tasks, jobs, |&(mi, dim, s)| {
        let method = cfg.methods[mi];
        let means = default_means(dim, cfg.k, cfg.fix_mean5)?;
        let run_seed = rng::derive_seed(cfg.seed, &format!("gaussian/dim{dim}/seed{s}"));
        let train_data =
            GaussianSpec { dim, means: means.clone(), n_per_group: cfg.n_train, seed: rng::derive_seed(run_seed, "train") }
                .sample()?;
        let eval_data =
            GaussianSpec { dim, means: means.clone(), n_per_group: cfg.n_eval, seed: rng::derive_seed(run_seed, "eval") }
                .sample()?;
        let pooled: Vec<Point> = eval_data.groups().iter().flatten().cloned().collect();
        let truth = |i: usize, j: usize, x: &[f64]| true_gaussian_ratio(&means[i], &means[j], x);
        if method == BenchMethod::Oracle {
            let oracle = OracleRatios::new(means.len(), |x: &[f64]| gaussian_ratios(&means, x));
            return mae_report(&oracle, truth, &pooled).map(Some);
        }
        let model = match trained_or_unit(&method, &cfg.model, &train_data, &cfg.optimizer, run_seed) {
            Ok(m) => m,
            Err(e) if e.is_numerical() => return Ok(None),
            Err(e) => return Err(e),
        };
        mae_report(&model, truth, &pooled).map(Some)
    })?;
    let mut rows = Vec::new();
    let mut it = results.into_iter();
    for method in &cfg.methods {
        for &dim in &cfg.dims {
            let per_seed: Vec<Option<MaeReport>> = it.by_ref().take(cfg.seeds).collect();
            let ok: Vec<&MaeReport> = per_seed.iter().flatten().collect();
            let stat = |f: fn(&MaeReport) -> f64| {
                (!ok.is_empty()).then(|| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>()))
            };
            let mae = stat(|r| r.mae);
            rows.push(GaussianRow {
                method: method.label(),
                dim,
                mae_mean: mae.map(|m| m.0),
                mae_std: mae.map(|m| m.1),
                clipped_mae_mean: stat(|r| r.clipped_mae).map(|m| m.0),
                log_mae_mean: stat(|r| r.log_mae).map(|m| m.0),
                diverged: per_seed.len() - ok.len(),
                per_seed,
            });
        }
    }
    Ok(GaussianReport {
        config: cfg.clone(),
        mean_family: if cfg.fix_mean5 { "fixed" } else { "verbatim" }.into(),
        eval_distribution: "pooled held-out samples of all groups (empirical mixture)".into(),
        rows,
    })
}

impl GaussianReport {
    pub fn row(&self, method: &str, dim: usize) -> Option<&GaussianRow> {
        self.rows.iter().find(|r| r.method == method && r.dim == dim)
    }

    /// Method × dim table of `mean ± std` cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.config.dims.iter().map(|d| format!("dim={d}")));
        let csv_err = |e: csv::Error| DreError::InvalidParameter(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for method in &self.config.methods {
            let mut rec = vec![method.label()];
            for &d in &self.config.dims {
                let r = self.row(&method.label(), d).expect("row exists");
                rec.push(match (r.mae_mean, r.mae_std) {
                    (Some(m), Some(sd)) if r.diverged == 0 => format!("{m:.3} ± {sd:.3}"),
                    (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3} ({} diverged)", r.diverged),
                    _ => "diverged".to_string(),
                });
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| DreError::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodBenchConfig {
    /// Component means; each component is `N(μ, 1)`.
    pub means: Vec<f64>,
    /// Mixture weights `α`; the pivot group is `Σ α_i N(μ_i, 1)`.
    pub weights: Vec<f64>,
    pub n_train: usize,
    pub n_eval: usize,
    pub seeds: usize,
    pub seed: u64,
    pub methods: Vec<BenchMethod>,
    pub model: ModelChoice,
    pub optimizer: OptimizerConfig,
}

impl Default for OodBenchConfig {
    fn default() -> Self {
        Self {
            means: vec![-3.0, 0.0, 3.0],
            weights: vec![1.0 / 3.0; 3],
            n_train: 2000,
            n_eval: 3000,
            seeds: 3,
            seed: 0,
            methods: vec![
                BenchMethod::RandomInit,
                BenchMethod::Objective { objective: ObjectiveName::MultiLr },
                BenchMethod::Oracle,
            ],
            model: ModelChoice { features: FeatureKind::Poly, degree: 2, ..ModelChoice::default() },
            optimizer: OptimizerConfig { step_size: 1e-2, epochs: 100, ..OptimizerConfig::default() },
        }
    }
}

impl OodBenchConfig {
    fn validate(&self) -> Result<()> {
        if self.means.is_empty() || self.means.len() != self.weights.len() {
            return Err(DreError::InvalidParameter("need one mixture weight per component".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DreError::InvalidParameter("mixture weights must be positive and sum to 1".into()));
        }
        if self.n_train == 0 || self.n_eval == 0 || self.seeds == 0 {
            return Err(DreError::InvalidParameter("sample sizes and seed count must be >= 1".into()));
        }
        Ok(())
    }

    fn sample_mixture(&self, n: usize, rng: &mut crate::rng::StreamRng) -> (Vec<Point>, Vec<usize>) {
        let dist = rand::distr::weighted::WeightedIndex::new(&self.weights).expect("validated weights");
        let mut xs = Vec::with_capacity(n);
        let mut comp = Vec::with_capacity(n);
        for _ in 0..n {
            let c = dist.sample(rng);
            xs.push(vec![self.means[c] + rng.sample::<f64, _>(StandardNormal)]);
            comp.push(c);
        }
        (xs, comp)
    }

    /// True `r_i(x) = N(x; μ_i) / Σ_j α_j N(x; μ_j)`.
    pub fn true_ratios(&self, x: f64) -> Vec<f64> {
        let dens: Vec<f64> = self.means.iter().map(|m| (-0.5 * (x - m).powi(2)).exp()).collect();
        let mix: f64 = dens.iter().zip(&self.weights).map(|(d, w)| d * w).sum();
        dens.iter().map(|d| d / mix).collect()
    }

    /// Best achievable per-component AUROC, by integration on a fine grid.
    pub fn oracle_auroc_grid(&self) -> Vec<f64> {
        let lo = self.means.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0;
        let hi = self.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 10.0;
        let n = 40_001;
        let h = (hi - lo) / (n - 1) as f64;
        (0..self.means.len())
            .map(|i| {
                let cells: Vec<(f64, f64, f64)> = (0..n)
                    .map(|g| {
                        let x = lo + g as f64 * h;
                        let dens: Vec<f64> = self.means.iter().map(|m| (-0.5 * (x - m).powi(2)).exp()).collect();
                        let mix: f64 = dens.iter().zip(&self.weights).map(|(d, w)| d * w).sum();
                        let neg: f64 = (0..dens.len()).filter(|&j| j != i).map(|j| self.weights[j] * dens[j]).sum();
                        (dens[i] / mix, dens[i], neg)
                    })
                    .collect();
                weighted_auroc(&cells)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodRow {
    pub method: String,
    pub mean_auroc: f64,
    pub std_auroc: f64,
    /// Per seed, per component.
    pub per_seed: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub config: OodBenchConfig,
    pub oracle_grid_auroc: Vec<f64>,
    pub oracle_grid_mean: f64,
    pub rows: Vec<OodRow>,
}

impl OodReport {
    pub fn row(&self, method: &str) -> Option<&OodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| DreError::InvalidParameter(e.to_string());
        w.write_record(["method", "mean_auroc"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.method.clone(), format!("{:.3} ± {:.3}", r.mean_auroc, r.std_auroc)]).map_err(csv_err)?;
        }
        w.write_record(["Oracle (grid)".to_string(), format!("{:.3}", self.oracle_grid_mean)]).map_err(csv_err)?;
        let bytes = w.into_inner().map_err(|e| DreError::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-component AUROC of scores `r̂_i(x)` against membership in component
/// `i`, on labelled mixture samples.
pub fn component_aurocs(source: &impl RatioSource, xs: &[Point], comp: &[usize]) -> Result<Vec<f64>> {
    let m = source.k() - 1;
    let ratios: Vec<Vec<f64>> = xs.iter().map(|x| source.ratios_at(x)).collect::<Result<_>>()?;
    (0..m)
        .map(|i| {
            let scores: Vec<f64> = ratios.iter().map(|r| r[i]).collect();
            let labels: Vec<bool> = comp.iter().map(|&c| c == i).collect();
            auroc(&scores, &labels)
        })
        .collect()
}

/// Train on components plus mixture, then score held-out mixture samples.
pub fn run_ood_benchmark(cfg: &OodBenchConfig, jobs: usize) -> Result<OodReport> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for mi in 0..cfg.methods.len() {
        for s in 0..cfg.seeds {
            tasks.push((mi, s));
        }
    }
    let results = run_jobs(&tasks, jobs, |&(mi, s)| {
        let method = cfg.methods[mi];
        let run_seed = rng::derive_seed(cfg.seed, &format!("ood/seed{s}"));
        let mut rng = rng::stream(run_seed, streams::SAMPLING);
        let mut groups: Vec<Vec<Point>> = cfg
            .means
            .iter()
            .map(|m| (0..cfg.n_train).map(|_| vec![m + rng.sample::<f64, _>(StandardNormal)]).collect())
            .collect();
        groups.push(cfg.sample_mixture(cfg.n_train, &mut rng).0);
        let data = GroupedDataset::new(groups)?;
        let mut eval_rng = rng::stream(run_seed, streams::EVAL);
        let (xs, comp) = cfg.sample_mixture(cfg.n_eval, &mut eval_rng);
        if method == BenchMethod::Oracle {
            let oracle = OracleRatios::new(cfg.means.len() + 1, |x: &[f64]| cfg.true_ratios(x[0]));
            return component_aurocs(&oracle, &xs, &comp);
        }
        let model = trained_or_unit(&method, &cfg.model, &data, &cfg.optimizer, run_seed)?;
        component_aurocs(&model, &xs, &comp)
    })?;
    let mut it = results.into_iter();
    let rows = cfg
        .methods
        .iter()
        .map(|m| {
            let per_seed: Vec<Vec<f64>> = it.by_ref().take(cfg.seeds).collect();
            let means: Vec<f64> = per_seed.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let (mean_auroc, std_auroc) = mean_std(&means);
            OodRow { method: m.label(), mean_auroc, std_auroc, per_seed }
        })
        .collect();
    let oracle_grid_auroc = cfg.oracle_auroc_grid();
    let oracle_grid_mean = oracle_grid_auroc.iter().sum::<f64>() / oracle_grid_auroc.len() as f64;
    Ok(OodReport { config: cfg.clone(), oracle_grid_auroc, oracle_grid_mean, rows })
}

/// `N(0, I)` draws shifted by `mean`, from a caller-owned generator.
pub fn sample_unit_gaussian(mean: &[f64], n: usize, rng: &mut impl Rng) -> Vec<Point> {
    (0..n).map(|_| mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}
