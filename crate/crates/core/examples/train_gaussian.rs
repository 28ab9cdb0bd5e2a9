//! Fit a log-linear ratio model to five Gaussians and report pairwise MAE.
use multidre::applications::mae_report;
use multidre::bench::{default_means, true_gaussian_ratio, GaussianSpec};
use multidre::data::estimate_prior;
use multidre::training::{train_with_callback, LossSpec, OptimizerConfig};
use multidre::{ConvexObjective, ModelChoice};

fn main() -> multidre::Result<()> {
    let means = default_means(2, 5, true)?;
    let train = GaussianSpec { dim: 2, means: means.clone(), n_per_group: 1000, seed: 1 }.sample()?;
    let eval = GaussianSpec { dim: 2, means: means.clone(), n_per_group: 500, seed: 2 }.sample()?;
    let loss = LossSpec::bregman(ConvexObjective::multi_lr(estimate_prior(&train)?)?);
    let model = ModelChoice::default().build(&train, 0)?;
    let cfg = OptimizerConfig { step_size: 1e-2, epochs: 100, ..Default::default() };
    let (model, report) = train_with_callback(&loss, model, &train, &cfg, |e, l| {
        if (e + 1) % 20 == 0 {
            println!("epoch {:>3}  loss {l:.5}", e + 1);
        }
    })?;
    let pooled: Vec<_> = eval.groups().iter().flatten().cloned().collect();
    let mae = mae_report(&model, |i, j, x| true_gaussian_ratio(&means[i], &means[j], x), &pooled)?;
    println!("{} steps, MAE {:.4}, log-MAE {:.4}", report.steps, mae.mae, mae.log_mae);
    Ok(())
}
