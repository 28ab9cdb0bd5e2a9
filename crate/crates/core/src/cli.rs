//! Command-line front end.
//!
//! Every subcommand shares one flag set. A `--config` file (TOML, or a
//! previous `run.json`) supplies defaults and explicit flags override it.
//! Each run writes `run.json` with the resolved settings into `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::applications::{
    auroc, effective_sample_size, mae_report, mis_estimate, mis_standard_error, pairwise_ratio, sir_resample,
    MisWeights, PairRatioQuery,
};
use crate::bench::{
    component_aurocs, default_means, gaussian_ratios, run_gaussian_benchmark, run_ood_benchmark, true_gaussian_ratio,
    BenchMethod, GaussianBenchConfig, GaussianSpec, OodBenchConfig,
};
use crate::data::{estimate_prior, read_points, read_rows, write_points, GroupedDataset, Point, Prior};
use crate::error::{DreError, Result};
use crate::models::{FeatureKind, ModelChoice, ModelKind, RatioModel};
use crate::objectives::{ConvexObjective, ObjectiveName};
use crate::rng;
use crate::scoring::{ScoringRule, DEFAULT_PS_ALPHA};
use crate::theory::{fdiv_plugin_with_se, fdiv_variational, verify_theory};
use crate::training::{gradient_check, train_with_callback, LossSpec, Method, OptimizerConfig};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for bad input, bad flags or a failed check.
pub const EXIT_INVALID: i32 = 1;
/// Exit status for a numerical abort during training.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "multidre", version, about = "Multi-distribution density ratio estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a ratio model to grouped samples.
    Train(Args),
    /// Pairwise MAE of a checkpoint against unit-Gaussian ground truth.
    EvalMae(Args),
    /// Plug-in and variational f-divergence estimates.
    Divergence(Args),
    /// Multiple importance sampling estimate of a target expectation.
    Mis(Args),
    /// Sampling-importance-resampling towards a target group.
    Sir(Args),
    /// AUROC from a score file or from a checkpoint on labelled points.
    Auroc(Args),
    /// Synthetic Gaussian MAE benchmark.
    BenchGaussian(Args),
    /// One-dimensional mixture OOD benchmark.
    BenchOod(Args),
    /// Numerical checks of the Bregman, prior and regret identities.
    VerifyTheory(Args),
    /// Compare analytic gradients with central differences.
    GradCheck(Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::EvalMae(_) => "eval-mae",
            Command::Divergence(_) => "divergence",
            Command::Mis(_) => "mis",
            Command::Sir(_) => "sir",
            Command::Auroc(_) => "auroc",
            Command::BenchGaussian(_) => "bench-gaussian",
            Command::BenchOod(_) => "bench-ood",
            Command::VerifyTheory(_) => "verify-theory",
            Command::GradCheck(_) => "grad-check",
        }
    }

    fn args(&self) -> &Args {
        match self {
            Command::Train(a)
            | Command::EvalMae(a)
            | Command::Divergence(a)
            | Command::Mis(a)
            | Command::Sir(a)
            | Command::Auroc(a)
            | Command::BenchGaussian(a)
            | Command::BenchOod(a)
            | Command::VerifyTheory(a)
            | Command::GradCheck(a) => a,
        }
    }
}

/// The shared flag set; also the shape of a TOML config file.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Args {
    /// TOML config, or a run.json from an earlier run.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Convex objective: multilr, lsif, kliep, power, quadratic, logsumexp.
    #[arg(long)]
    pub objective: Option<String>,
    /// Objective parameter (power, logsumexp) or pseudo-spherical exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Scoring rule: log, brier, pseudospherical.
    #[arg(long)]
    pub rule: Option<String>,
    /// Pseudo-spherical exponent.
    #[arg(long)]
    pub ps_alpha: Option<f64>,
    /// Class prior as CSV; estimated from group sizes when absent.
    #[arg(long)]
    pub prior: Option<String>,
    /// Quadratic objective matrix H (CSV, one row per line).
    #[arg(long)]
    pub quad_h: Option<PathBuf>,
    /// Quadratic objective vector q (CSV, one line).
    #[arg(long)]
    pub quad_q: Option<PathBuf>,
    /// Model family: loglinear or mlp.
    #[arg(long)]
    pub model: Option<String>,
    /// Log-linear features: identity, poly, rbf.
    #[arg(long)]
    pub features: Option<String>,
    /// Polynomial feature degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// MLP hidden widths as CSV.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Benchmark dimensions as CSV.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of benchmark seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Samples per group per step.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Optimizer: adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for benchmarks.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replace the fifth benchmark mean by (0,0,1,...).
    #[arg(long)]
    pub fix_mean5: bool,
    /// Sample CSV files, one per group (repeatable).
    #[arg(long)]
    pub data: Vec<PathBuf>,
    /// Single CSV with a leading label column.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Model checkpoint (JSON).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Random trials for verify-theory.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Print `epoch,loss` every N epochs while training.
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Target group (1-based).
    #[arg(long)]
    pub target: Option<usize>,
    /// Group the SIR samples were drawn from (1-based).
    #[arg(long)]
    pub source: Option<usize>,
    /// Proposal groups for MIS as 1-based CSV, one per --data file.
    #[arg(long)]
    pub proposals: Option<String>,
    /// MIS proposal weights, or OOD mixture weights, as CSV.
    #[arg(long)]
    pub omega: Option<String>,
    /// Number of SIR draws.
    #[arg(long)]
    pub m: Option<usize>,
    /// Gaussian means: `1,0;-1,0;...` (or `-3,0,3` for bench-ood).
    #[arg(long)]
    pub means: Option<String>,
    /// MIS integrand: x1, sum, sq, one.
    #[arg(long)]
    pub phi: Option<String>,
    /// Benchmark methods as CSV, e.g. `random-init,multi-lr,brier`.
    #[arg(long)]
    pub methods: Option<String>,
    /// Training samples per group for benchmarks.
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Held-out samples per group for benchmarks.
    #[arg(long)]
    pub n_eval: Option<usize>,
    /// Finite-difference step for grad-check.
    #[arg(long)]
    pub eps: Option<f64>,
}

impl Args {
    /// Fill unset fields from `base`.
    fn merged_over(mut self, base: Args) -> Args {
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = base.$f; } )* };
        }
        fill!(
            objective, alpha, rule, ps_alpha, prior, quad_h, quad_q, model, features, degree, hidden, dims, seed,
            seeds, epochs, lr, batch, optimizer, out, jobs, labeled, checkpoint, trials, log_every, target, source,
            proposals, omega, m, means, phi, methods, n_train, n_eval, eps
        );
        self.fix_mean5 |= base.fix_mean5;
        if self.data.is_empty() {
            self.data = base.data;
        }
        self
    }
}

/// The record written to `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: Args,
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
}

fn load_config(path: &Path) -> Result<Args> {
    let text = fs::read_to_string(path).map_err(|source| DreError::Io { path: path.to_path_buf(), source })?;
    let parse = |message: String| DreError::Parse { path: path.to_path_buf(), message };
    if path.extension().is_some_and(|e| e == "json") {
        let rec: RunRecord = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
        Ok(rec.config)
    } else {
        toml::from_str(&text).map_err(|e| parse(e.to_string()))
    }
}

fn parse_csv<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| DreError::InvalidParameter(format!("bad {what} entry {t:?} in {s:?}"))))
        .collect()
}

fn parse_means(s: &str) -> Result<Vec<Point>> {
    s.split(';').map(|v| parse_csv::<f64>(v, "mean")).collect()
}

struct Ctx {
    args: Args,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|source| DreError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn dataset(&self) -> Result<GroupedDataset> {
        match (&self.args.labeled, self.args.data.len()) {
            (Some(p), 0) => GroupedDataset::from_labeled_file(p),
            (None, n) if n >= 2 => GroupedDataset::from_group_files(&self.args.data),
            (Some(_), _) => Err(DreError::InvalidParameter("use either --labeled or --data, not both".into())),
            (None, _) => Err(DreError::InvalidParameter("need at least two --data files (or --labeled)".into())),
        }
    }

    fn checkpoint(&self) -> Result<RatioModel> {
        match &self.args.checkpoint {
            Some(p) => RatioModel::load(p),
            None => Err(DreError::InvalidParameter("--checkpoint is required".into())),
        }
    }

    fn prior(&self, k: usize) -> Result<Option<Prior>> {
        match &self.args.prior {
            Some(s) => {
                let p = Prior::new(parse_csv(s, "prior")?)?;
                if p.k() != k {
                    return Err(DreError::DimensionMismatch { expected: k, got: p.k() });
                }
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    fn rule(&self) -> Result<Option<ScoringRule>> {
        let Some(name) = &self.args.rule else { return Ok(None) };
        let alpha = self.args.ps_alpha.or(self.args.alpha).unwrap_or(DEFAULT_PS_ALPHA);
        ScoringRule::from_name(name, Some(alpha)).map(Some)
    }

    fn objective(&self, default: ObjectiveName, dataset: Option<&GroupedDataset>, k: usize) -> Result<ConvexObjective> {
        let name: ObjectiveName = match &self.args.objective {
            Some(s) => s.parse()?,
            None => default,
        };
        if name == ObjectiveName::Quadratic && (self.args.quad_h.is_some() || self.args.quad_q.is_some()) {
            let (Some(hp), Some(qp)) = (&self.args.quad_h, &self.args.quad_q) else {
                return Err(DreError::InvalidParameter("--quad-h and --quad-q must be given together".into()));
            };
            let h: Vec<f64> = read_rows(hp)?.into_iter().flatten().collect();
            let q: Vec<f64> = read_rows(qp)?.into_iter().flatten().collect();
            if q.len() + 1 != k {
                return Err(DreError::DimensionMismatch { expected: k - 1, got: q.len() });
            }
            return ConvexObjective::quadratic(h, q);
        }
        let prior = match (name, self.prior(k)?, dataset) {
            (ObjectiveName::MultiLr, Some(p), _) => Some(p),
            (ObjectiveName::MultiLr, None, Some(ds)) => Some(estimate_prior(ds)?),
            _ => None,
        };
        ConvexObjective::from_name(name, k, self.args.alpha, prior)
    }

    fn loss(&self, dataset: &GroupedDataset) -> Result<LossSpec> {
        if self.args.rule.is_some() && self.args.objective.is_some() {
            return Err(DreError::InvalidParameter("give either --objective or --rule, not both".into()));
        }
        if let Some(rule) = self.rule()? {
            return Ok(LossSpec::Scoring { rule, prior: self.prior(dataset.k())? });
        }
        Ok(LossSpec::bregman(self.objective(ObjectiveName::MultiLr, Some(dataset), dataset.k())?))
    }

    fn model_choice(&self, default: ModelChoice) -> Result<ModelChoice> {
        let mut c = default;
        if let Some(m) = &self.args.model {
            c.kind = match m.to_ascii_lowercase().as_str() {
                "loglinear" | "log-linear" => ModelKind::Loglinear,
                "mlp" => ModelKind::Mlp,
                other => return Err(DreError::InvalidParameter(format!("unknown model {other:?} (loglinear, mlp)"))),
            };
        }
        if let Some(f) = &self.args.features {
            c.features = match f.to_ascii_lowercase().as_str() {
                "identity" => FeatureKind::Identity,
                "poly" | "polynomial" => FeatureKind::Poly,
                "rbf" => FeatureKind::Rbf,
                other => {
                    return Err(DreError::InvalidParameter(format!("unknown features {other:?} (identity, poly, rbf)")))
                }
            };
        }
        if let Some(d) = self.args.degree {
            c.degree = d;
        }
        if let Some(h) = &self.args.hidden {
            c.hidden = parse_csv(h, "hidden width")?;
        }
        Ok(c)
    }

    fn optimizer(&self, default: OptimizerConfig) -> Result<OptimizerConfig> {
        let mut o = default;
        o.seed = self.seed;
        if let Some(e) = self.args.epochs {
            o.epochs = e;
        }
        if let Some(lr) = self.args.lr {
            o.step_size = lr;
        }
        if let Some(b) = self.args.batch {
            o.batch_size = b;
        }
        if let Some(m) = &self.args.optimizer {
            o.method = match m.to_ascii_lowercase().as_str() {
                "adam" => Method::Adam,
                "sgd" => Method::Sgd,
                other => return Err(DreError::InvalidParameter(format!("unknown optimizer {other:?} (adam, sgd)"))),
            };
        }
        o.validate()?;
        Ok(o)
    }

    fn methods(&self, default: Vec<BenchMethod>) -> Result<Vec<BenchMethod>> {
        match &self.args.methods {
            Some(s) => {
                let mut out = Vec::new();
                for name in s.split(',') {
                    let mut m: BenchMethod = name.trim().parse()?;
                    if let BenchMethod::Rule { rule: ScoringRule::PseudoSpherical { .. } } = m {
                        let a = self.args.ps_alpha.unwrap_or(DEFAULT_PS_ALPHA);
                        m = BenchMethod::Rule { rule: ScoringRule::pseudo_spherical(a)? };
                    }
                    out.push(m);
                }
                Ok(out)
            }
            None => Ok(default),
        }
    }

    fn dims(&self, default: &[usize]) -> Result<Vec<usize>> {
        match &self.args.dims {
            Some(s) => parse_csv(s, "dim"),
            None => Ok(default.to_vec()),
        }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    let start = Instant::now();
    let flags = cmd.args().clone();
    let args = match &flags.config {
        Some(p) => flags.clone().merged_over(load_config(p)?),
        None => flags,
    };
    let seed = args.seed.unwrap_or(0);
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("multidre-out"));
    fs::create_dir_all(&out).map_err(|source| DreError::Io { path: out.clone(), source })?;
    let mut ctx = Ctx { args, seed, out };
    let code = match cmd {
        Command::Train(_) => cmd_train(&mut ctx)?,
        Command::EvalMae(_) => cmd_eval_mae(&ctx)?,
        Command::Divergence(_) => cmd_divergence(&ctx)?,
        Command::Mis(_) => cmd_mis(&ctx)?,
        Command::Sir(_) => cmd_sir(&ctx)?,
        Command::Auroc(_) => cmd_auroc(&ctx)?,
        Command::BenchGaussian(_) => cmd_bench_gaussian(&mut ctx)?,
        Command::BenchOod(_) => cmd_bench_ood(&mut ctx)?,
        Command::VerifyTheory(_) => cmd_verify_theory(&mut ctx)?,
        Command::GradCheck(_) => cmd_grad_check(&ctx)?,
    };
    let mut config = ctx.args.clone();
    config.seed = Some(ctx.seed);
    let record = RunRecord {
        command: cmd.name().into(),
        config,
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    ctx.write_json("run.json", &record)?;
    Ok(code)
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_train(ctx: &mut Ctx) -> Result<i32> {
    let data = ctx.dataset()?;
    let loss = ctx.loss(&data)?.resolve(&data)?;
    let choice = ctx.model_choice(ModelChoice::default())?;
    let opt = ctx.optimizer(OptimizerConfig::default())?;
    let model = choice.build(&data, ctx.seed)?;
    let every = ctx.args.log_every.unwrap_or(0);
    if every > 0 {
        println!("epoch,loss");
    }
    let (model, report) = train_with_callback(&loss, model, &data, &opt, |e, l| {
        if every > 0 && (e + 1) % every == 0 {
            println!("{},{l}", e + 1);
        }
    })?;
    let checkpoint = ctx.out.join("model.json");
    model.save(&checkpoint)?;
    let doc = json!({
        "report": report,
        "loss": loss,
        "model": choice,
        "optimizer": opt,
        "group_sizes": data.sizes(),
    });
    ctx.write_json("report.json", &doc)?;
    print_json(&json!({ "final_loss": report.final_loss, "steps": report.steps, "checkpoint": checkpoint }))?;
    Ok(EXIT_OK)
}

fn gaussian_truth(ctx: &Ctx, dim: usize, k: usize) -> Result<Vec<Point>> {
    let means = match &ctx.args.means {
        Some(s) => parse_means(s)?,
        None => default_means(dim, k, ctx.args.fix_mean5)?,
    };
    if means.len() != k || means.iter().any(|m| m.len() != dim) {
        return Err(DreError::InvalidParameter(format!("need {k} means of length {dim}")));
    }
    Ok(means)
}

fn eval_points(ctx: &Ctx) -> Result<Vec<Point>> {
    let mut pts = Vec::new();
    for p in &ctx.args.data {
        pts.extend(read_points(p)?);
    }
    if let Some(p) = &ctx.args.labeled {
        pts.extend(GroupedDataset::from_labeled_file(p)?.groups().iter().flatten().cloned());
    }
    if pts.is_empty() {
        return Err(DreError::InvalidParameter("need evaluation points via --data or --labeled".into()));
    }
    Ok(pts)
}

fn cmd_eval_mae(ctx: &Ctx) -> Result<i32> {
    let model = ctx.checkpoint()?;
    let pts = eval_points(ctx)?;
    let k = model.output_dim() + 1;
    let means = gaussian_truth(ctx, model.input_dim(), k)?;
    let rep = mae_report(&model, |i, j, x| true_gaussian_ratio(&means[i], &means[j], x), &pts)?;
    let doc = json!({ "mae": rep, "means": means, "eval_distribution": "pooled points from all inputs" });
    ctx.write_json("mae.json", &doc)?;
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_divergence(ctx: &Ctx) -> Result<i32> {
    let data = ctx.dataset()?;
    let k = data.k();
    let obj = ctx.objective(ObjectiveName::Kliep, Some(&data), k)?;
    let mut doc = json!({ "objective": obj, "k": k });
    if ctx.args.means.is_some() || ctx.args.fix_mean5 || ctx.args.checkpoint.is_none() {
        let means = gaussian_truth(ctx, data.dim(), k)?;
        let (est, se) = fdiv_plugin_with_se(&obj, |x| crate::link::RatioVector::from_trusted(gaussian_ratios(&means, x)), data.pivot())?;
        doc["plugin"] = json!(est);
        doc["plugin_se"] = json!(se);
    }
    if ctx.args.checkpoint.is_some() {
        let model = ctx.checkpoint()?;
        doc["variational"] = json!(fdiv_variational(&obj, &model, &data)?);
    }
    ctx.write_json("divergence.json", &doc)?;
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn phi_fn(name: &str) -> Result<fn(&Point) -> f64> {
    Ok(match name {
        "x1" => |x: &Point| x[0],
        "sum" => |x: &Point| x.iter().sum(),
        "sq" => |x: &Point| x.iter().map(|v| v * v).sum(),
        "one" => |_: &Point| 1.0,
        other => return Err(DreError::InvalidParameter(format!("unknown phi {other:?} (x1, sum, sq, one)"))),
    })
}

fn group_index(v: usize, k: usize, what: &str) -> Result<usize> {
    if v == 0 || v > k {
        return Err(DreError::InvalidParameter(format!("{what} {v} out of range 1..={k}")));
    }
    Ok(v - 1)
}

fn cmd_mis(ctx: &Ctx) -> Result<i32> {
    let model = ctx.checkpoint()?;
    let k = model.output_dim() + 1;
    let target = group_index(ctx.args.target.unwrap_or(k), k, "target")?;
    let proposals: Vec<usize> = match &ctx.args.proposals {
        Some(s) => parse_csv::<usize>(s, "proposal")?.into_iter().map(|p| group_index(p, k, "proposal")).collect::<Result<_>>()?,
        None => (0..k).filter(|&i| i != target).collect(),
    };
    if ctx.args.data.len() != proposals.len() {
        return Err(DreError::InvalidParameter(format!(
            "need one --data file per proposal ({} proposals, {} files)",
            proposals.len(),
            ctx.args.data.len()
        )));
    }
    let samples: Vec<Vec<Point>> = ctx.args.data.iter().map(|p| read_points(p)).collect::<Result<_>>()?;
    let omega = match &ctx.args.omega {
        Some(s) => MisWeights::new(parse_csv(s, "omega")?)?,
        None => MisWeights::uniform(proposals.len()),
    };
    let phi_name = ctx.args.phi.clone().unwrap_or_else(|| "x1".into());
    let phi = phi_fn(&phi_name)?;
    let ratio_fns: Vec<_> = proposals
        .iter()
        .map(|&p| {
            let model = &model;
            move |x: &Point| {
                if p == target {
                    1.0
                } else {
                    pairwise_ratio(model, x, PairRatioQuery::new(target, p, k).expect("validated pair"))
                        .unwrap_or(f64::NAN)
                }
            }
        })
        .collect();
    let estimate = mis_estimate(&ratio_fns, &omega, phi, &samples)?;
    if !estimate.is_finite() {
        return Err(DreError::InvalidParameter("sample dimension does not match the checkpoint".into()));
    }
    let se = mis_standard_error(&ratio_fns, &omega, phi, &samples)?;
    let doc = json!({
        "estimate": estimate,
        "standard_error": se,
        "target": target + 1,
        "proposals": proposals.iter().map(|p| p + 1).collect::<Vec<_>>(),
        "omega": omega,
        "phi": phi_name,
        "samples_per_proposal": samples.iter().map(Vec::len).collect::<Vec<_>>(),
    });
    ctx.write_json("mis.json", &doc)?;
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_sir(ctx: &Ctx) -> Result<i32> {
    let model = ctx.checkpoint()?;
    let k = model.output_dim() + 1;
    let target = group_index(ctx.args.target.unwrap_or(1), k, "target")?;
    let source = group_index(ctx.args.source.unwrap_or(k), k, "source")?;
    let [path] = ctx.args.data.as_slice() else {
        return Err(DreError::InvalidParameter("sir needs exactly one --data file of source samples".into()));
    };
    let pts = read_points(path)?;
    let weights: Vec<f64> = if target == source {
        vec![1.0; pts.len()]
    } else {
        let q = PairRatioQuery::new(target, source, k)?;
        pts.iter().map(|x| pairwise_ratio(&model, x, q)).collect::<Result<_>>()?
    };
    let m = ctx.args.m.unwrap_or(pts.len());
    let idx = sir_resample(&weights, m, ctx.seed)?;
    let ess = effective_sample_size(&weights)?;
    let chosen: Vec<Point> = idx.iter().map(|&i| pts[i].clone()).collect();
    write_points(&ctx.out.join("resampled.csv"), &chosen)?;
    let doc = json!({
        "m": m,
        "n_source": pts.len(),
        "target": target + 1,
        "source": source + 1,
        "effective_sample_size": ess,
        "ess_fraction": ess / pts.len() as f64,
        "resampled": ctx.out.join("resampled.csv"),
    });
    ctx.write_json("sir.json", &doc)?;
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_auroc(ctx: &Ctx) -> Result<i32> {
    let doc = if ctx.args.checkpoint.is_some() {
        let model = ctx.checkpoint()?;
        let Some(path) = &ctx.args.labeled else {
            return Err(DreError::InvalidParameter("auroc with --checkpoint needs --labeled points".into()));
        };
        let rows = read_rows(path)?;
        let xs: Vec<Point> = rows.iter().map(|r| r[1..].to_vec()).collect();
        // Label i in 1..k-1 marks membership in component i; 0 marks none.
        let comp: Vec<usize> = rows.iter().map(|r| if r[0] >= 1.0 { r[0] as usize - 1 } else { usize::MAX }).collect();
        let per = component_aurocs(&model, &xs, &comp)?;
        json!({ "per_component": per, "mean_auroc": per.iter().sum::<f64>() / per.len() as f64 })
    } else {
        let [path] = ctx.args.data.as_slice() else {
            return Err(DreError::InvalidParameter("auroc needs one --data file of score,label rows or --checkpoint".into()));
        };
        let rows = read_rows(path)?;
        if rows[0].len() != 2 {
            return Err(DreError::Parse { path: path.clone(), message: "expected two columns: score,label".into() });
        }
        let scores: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[1] != 0.0).collect();
        json!({ "auroc": auroc(&scores, &labels)?, "n": rows.len() })
    };
    ctx.write_json("auroc.json", &doc)?;
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_bench_gaussian(ctx: &mut Ctx) -> Result<i32> {
    let d = GaussianBenchConfig::default();
    let cfg = GaussianBenchConfig {
        dims: ctx.dims(&d.dims)?,
        fix_mean5: ctx.args.fix_mean5,
        n_train: ctx.args.n_train.unwrap_or(d.n_train),
        n_eval: ctx.args.n_eval.unwrap_or(d.n_eval),
        seeds: ctx.args.seeds.unwrap_or(d.seeds),
        seed: ctx.seed,
        methods: ctx.methods(d.methods.clone())?,
        model: ctx.model_choice(d.model.clone())?,
        optimizer: ctx.optimizer(d.optimizer.clone())?,
        ..d
    };
    let rep = run_gaussian_benchmark(&cfg, ctx.args.jobs.unwrap_or(1))?;
    ctx.write_json("gaussian.json", &rep)?;
    let table = rep.to_csv()?;
    ctx.write("gaussian.csv", &table)?;
    print!("{table}");
    Ok(EXIT_OK)
}

fn cmd_bench_ood(ctx: &mut Ctx) -> Result<i32> {
    let d = OodBenchConfig::default();
    let means = match &ctx.args.means {
        Some(s) => parse_csv(s, "mean")?,
        None => d.means.clone(),
    };
    let weights = match &ctx.args.omega {
        Some(s) => parse_csv(s, "mixture weight")?,
        None => vec![1.0 / means.len() as f64; means.len()],
    };
    let cfg = OodBenchConfig {
        means,
        weights,
        n_train: ctx.args.n_train.unwrap_or(d.n_train),
        n_eval: ctx.args.n_eval.unwrap_or(d.n_eval),
        seeds: ctx.args.seeds.unwrap_or(d.seeds),
        seed: ctx.seed,
        methods: ctx.methods(d.methods.clone())?,
        model: ctx.model_choice(d.model.clone())?,
        optimizer: ctx.optimizer(d.optimizer.clone())?,
    };
    let rep = run_ood_benchmark(&cfg, ctx.args.jobs.unwrap_or(1))?;
    ctx.write_json("ood.json", &rep)?;
    let table = rep.to_csv()?;
    ctx.write("ood.csv", &table)?;
    print!("{table}");
    Ok(EXIT_OK)
}

fn cmd_verify_theory(ctx: &mut Ctx) -> Result<i32> {
    let trials = ctx.args.trials.unwrap_or(1000);
    let rep = verify_theory(ctx.seed, trials)?;
    ctx.write_json("theory.json", &rep)?;
    print_json(&rep)?;
    if rep.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: at least one identity residual exceeded its tolerance");
        Ok(EXIT_INVALID)
    }
}

/// Largest relative gradient error accepted by `grad-check`.
pub const GRAD_CHECK_TOL: f64 = 1e-4;

fn cmd_grad_check(ctx: &Ctx) -> Result<i32> {
    use rand::Rng;
    let data = if ctx.args.data.is_empty() && ctx.args.labeled.is_none() {
        let dim = ctx.dims(&[2])?[0];
        let means = gaussian_truth(ctx, dim, 5)?;
        GaussianSpec { dim, means, n_per_group: 32, seed: ctx.seed }.sample()?
    } else {
        ctx.dataset()?
    };
    let loss = ctx.loss(&data)?;
    let choice = ctx.model_choice(ModelChoice::default())?;
    let mut model = choice.build(&data, ctx.seed)?;
    // Move away from the symmetric initialization so every parameter matters.
    let mut rng = rng::stream(ctx.seed, "grad-check");
    for p in model.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let eps = ctx.args.eps.unwrap_or(1e-6);
    let err = gradient_check(&loss, &model, &data, eps)?;
    let passed = err <= GRAD_CHECK_TOL;
    let doc = json!({ "max_rel_error": err, "tolerance": GRAD_CHECK_TOL, "passed": passed, "loss": loss, "model": choice, "epsilon": eps });
    ctx.write_json("grad_check.json", &doc)?;
    print_json(&doc)?;
    Ok(if passed { EXIT_OK } else { EXIT_INVALID })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let base = Args { epochs: Some(5), lr: Some(0.1), data: vec!["a.csv".into()], ..Default::default() };
        let flags = Args { epochs: Some(7), ..Default::default() };
        let m = flags.merged_over(base);
        assert_eq!(m.epochs, Some(7));
        assert_eq!(m.lr, Some(0.1));
        assert_eq!(m.data, vec![PathBuf::from("a.csv")]);
    }

    #[test]
    fn toml_config_parses() {
        let a: Args = toml::from_str("rule = \"pseudospherical\"\nps_alpha = 1.8\nepochs = 3\n").unwrap();
        assert_eq!(a.rule.as_deref(), Some("pseudospherical"));
        assert_eq!(a.ps_alpha, Some(1.8));
        assert!(toml::from_str::<Args>("nonsense = 1").is_err());
    }

    #[test]
    fn means_parse() {
        assert_eq!(parse_means("1,0;-1,0").unwrap(), vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(parse_csv::<usize>("1,x", "dim").is_err());
    }

    #[test]
    fn unknown_flag_is_invalid() {
        assert_eq!(run(["multidre", "train", "--bogus"]), EXIT_INVALID);
        assert_eq!(run(["multidre"]), EXIT_INVALID);
    }
}
