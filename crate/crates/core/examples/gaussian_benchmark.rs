//! Small Gaussian benchmark table: method × dim of pooled pairwise MAE.
use multidre::bench::{run_gaussian_benchmark, BenchMethod, GaussianBenchConfig};

fn main() -> multidre::Result<()> {
    let cfg = GaussianBenchConfig {
        dims: vec![2],
        seeds: 2,
        n_train: 1000,
        n_eval: 500,
        methods: vec!["random-init", "multi-lr", "brier", "logsumexp", "oracle"]
            .into_iter()
            .map(str::parse::<BenchMethod>)
            .collect::<multidre::Result<_>>()?,
        ..Default::default()
    };
    let report = run_gaussian_benchmark(&cfg, 2)?;
    print!("{}", report.to_csv()?);
    Ok(())
}
