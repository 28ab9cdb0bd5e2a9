//! Score mixture samples by component ratios and report AUROC per component.
use multidre::bench::{run_ood_benchmark, OodBenchConfig};

fn main() -> multidre::Result<()> {
    let cfg = OodBenchConfig { seeds: 1, ..Default::default() };
    let report = run_ood_benchmark(&cfg, 1)?;
    print!("{}", report.to_csv()?);
    println!("grid oracle per component: {:?}", report.oracle_grid_auroc);
    Ok(())
}
