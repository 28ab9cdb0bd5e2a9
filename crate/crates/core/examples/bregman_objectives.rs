//! Evaluate every convex objective and its Bregman divergence on one pair.
use multidre::objectives::{ConvexObjective, ObjectiveName};

fn main() -> multidre::Result<()> {
    let k = 3;
    let (x, y) = ([0.5, 2.0], [1.0, 1.0]);
    for name in ObjectiveName::ALL {
        let f = ConvexObjective::from_name(name, k, None, None)?;
        println!(
            "{:<10} f(x) = {:>9.5}  grad f(x) = {:?}  B_f(x, 1) = {:.6}",
            name.as_str(),
            f.value(&x),
            f.gradient(&x),
            f.bregman(&x, &y)
        );
    }
    let p2 = ConvexObjective::power(k, 2.0)?;
    let lsif = ConvexObjective::lsif(k)?;
    println!("power(2) / lsif = {:.12}", p2.bregman(&x, &y) / lsif.bregman(&x, &y));
    Ok(())
}
