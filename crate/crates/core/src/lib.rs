//! Unbiased estimation of the least-squares optimum from constant-step,
//! tail-averaged SGD via randomized multilevel debiasing, with estimators of
//! squared bias, variance and excess risk, and closed-form bound calculators.

pub mod diagnostics;
pub mod error;
pub mod model;
pub mod rmlmc;
pub mod sgd;
pub mod stream;

pub use error::{Error, Result};
pub use model::{ModelConstants, ModelSpec, Sample};
pub use rmlmc::{LevelDistribution, Variant};
pub use sgd::CostMeter;
pub use stream::{Lineage, NoiseStream, Role};
