//! Resample draws from one Gaussian towards another with exact weights.
use multidre::applications::{effective_sample_size, sir_resample};
use multidre::bench::true_gaussian_ratio;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> multidre::Result<()> {
    let mut rng = multidre::rng::stream(5, "example");
    let source: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let w: Vec<f64> = source.iter().map(|&x| true_gaussian_ratio(&[1.0], &[0.0], &[x])).collect();
    let idx = sir_resample(&w, 10_000, 9)?;
    let mean = idx.iter().map(|&i| source[i]).sum::<f64>() / idx.len() as f64;
    println!("ESS {:.0} of {}", effective_sample_size(&w)?, source.len());
    println!("resampled mean {mean:.3}  (target mean 1)");
    Ok(())
}
