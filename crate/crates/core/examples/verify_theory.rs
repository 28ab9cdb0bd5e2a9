//! Run the identity checks and print the worst residual of each.
fn main() -> multidre::Result<()> {
    let report = multidre::theory::verify_theory(7, 200)?;
    for c in &report.checks {
        println!("{:<48} {:.3e}  (tol {:.0e})", c.name, c.max_residual, c.tolerance);
    }
    println!("all passed: {}", report.passed);
    Ok(())
}
