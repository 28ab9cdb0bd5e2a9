//! Pointwise losses of the three scoring rules and the properness check.
use multidre::scoring::expected_loss;
use multidre::{pointwise_loss, ProbabilityVector, ScoringRule};

fn main() -> multidre::Result<()> {
    let eta = ProbabilityVector::new(vec![0.8, 0.2])?;
    let p = eta.clone();
    let q = ProbabilityVector::new(vec![0.7, 0.3])?;
    for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::pseudo_spherical(2.0)?] {
        println!(
            "{:<16} loss(label 0) = {:.6}  E_p loss(p) = {:.4}  E_p loss(q) = {:.4}",
            rule.to_string(),
            pointwise_loss(&rule, 0, &eta)?,
            expected_loss(&rule, &p, &p)?,
            expected_loss(&rule, &p, &q)?
        );
    }
    Ok(())
}
