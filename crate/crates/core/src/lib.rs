//! Multi-distribution density ratio estimation.

pub mod applications;
pub mod bench;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod link;
pub mod models;
pub mod objectives;
pub mod rng;
pub mod scoring;
pub mod theory;
pub mod training;

pub use data::{GroupedDataset, Minibatch, Point, Prior};
pub use error::{DreError, Result};
pub use link::{link_forward, link_inverse, ProbabilityVector, RatioVector};
pub use models::{init_model, FeatureMap, ModelChoice, ModelSpec, RatioModel};
pub use objectives::{dre_loss, ConvexObjective, ObjectiveName};
pub use scoring::{cpe_dre_loss, pointwise_loss, ScoringRule};
