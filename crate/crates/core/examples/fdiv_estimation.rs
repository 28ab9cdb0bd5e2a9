//! KL divergence between two unit Gaussians: plug-in with true ratios and
//! the variational bound from a trained model.
use multidre::bench::{gaussian_ratios, GaussianSpec};
use multidre::link::RatioVector;
use multidre::theory::{fdiv_plugin_with_se, fdiv_variational};
use multidre::training::{train, LossSpec, OptimizerConfig};
use multidre::{ConvexObjective, ModelChoice};

fn main() -> multidre::Result<()> {
    let means = vec![vec![1.0], vec![0.0]];
    let ds = GaussianSpec { dim: 1, means: means.clone(), n_per_group: 4000, seed: 3 }.sample()?;
    let kliep = ConvexObjective::kliep(2)?;
    let (plug, se) = fdiv_plugin_with_se(&kliep, |x| RatioVector::new(gaussian_ratios(&means, x)).expect("positive"), ds.pivot())?;
    println!("plug-in    {plug:.4} ± {se:.4}  (exact 0.5)");
    let model = ModelChoice::default().build(&ds, 0)?;
    let cfg = OptimizerConfig { step_size: 1e-2, epochs: 50, ..Default::default() };
    let (model, _) = train(&LossSpec::bregman(kliep.clone()), model, &ds, &cfg)?;
    println!("variational {:.4}", fdiv_variational(&kliep, &model, &ds)?);
    Ok(())
}
