//! Save a model checkpoint and reload it with identical predictions.
use multidre::models::{FeatureMap, ModelSpec};
use multidre::{init_model, RatioModel};

fn main() -> multidre::Result<()> {
    let mut model = init_model(&ModelSpec::log_linear(FeatureMap::Polynomial { dim: 2, degree: 2 }, 3), 0)?;
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        *p = 0.1 * (i as f64).sin();
    }
    let dir = std::env::temp_dir().join("multidre-checkpoint-example");
    std::fs::create_dir_all(&dir).map_err(|source| multidre::DreError::Io { path: dir.clone(), source })?;
    let path = dir.join("model.json");
    model.save(&path)?;
    let back = RatioModel::load(&path)?;
    let x = [0.3, -1.2];
    println!("{:?}", model.eval(&x)?.values());
    println!("{:?}", back.eval(&x)?.values());
    assert_eq!(model, back);
    Ok(())
}
