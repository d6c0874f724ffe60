//! Input-adaptive Bayesian model averaging.
//!
//! Base predictors `f_1..f_m` are combined as `Σ_j α_j(x) f_j(y|x)` where the
//! weights come from an amortized posterior network trained against an
//! energy-based prior that depends on the query input.

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod math;
pub mod metrics;
pub mod posterior;
pub mod predictors;
pub mod prior;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dataset, Labels, LikelihoodTable, MixtureOutput, MixturePrediction, SimplexWeights, Task};
