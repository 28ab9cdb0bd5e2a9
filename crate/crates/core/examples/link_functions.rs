//! Map class probabilities to density ratios and back.
use multidre::{link_forward, link_inverse, ProbabilityVector, Prior};

fn main() -> multidre::Result<()> {
    let prior = Prior::new(vec![0.2, 0.3, 0.5])?;
    let eta = ProbabilityVector::new(vec![0.5, 0.25, 0.25])?;
    let r = link_forward(&eta, &prior)?;
    println!("eta {:?} -> ratios {:?}", eta.values(), r.values());
    let back = link_inverse(&r, &prior)?;
    println!("ratios -> eta {:?}", back.values());
    for i in 0..3 {
        for j in 0..3 {
            print!("{:8.4}", r.full(i) / r.full(j));
        }
        println!();
    }
    Ok(())
}
