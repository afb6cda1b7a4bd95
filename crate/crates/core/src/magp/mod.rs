//! Mapping-based additive Gaussian process.
//!
//! Each component h contributes a Gaussian kernel over its quantity `x_h` and
//! the latent coordinates of its order position `o_h`; the latent positions
//! (a k x t lower-triangular [`MappingMatrix`]) are shared by all components.

mod fit;
mod kernel;
mod likelihood;
mod mapping;
mod model;

pub use fit::{fit, free_parameters, FitConfig, Tau2Policy};
pub use kernel::{component_distance, cov_matrix, covariance, CovFactor, MaGPParams, JITTER_LADDER};
pub use likelihood::{nll_gradient, profile_nll, NllGradient};
pub use mapping::{latent_map, param_count, MappingMatrix};
pub use model::{predict, standardization, MaGPModel, ModelSnapshot, Posterior, Prediction, PredictionGrad, TrainingRow};

pub(crate) use kernel::kernel;
pub(crate) use model::Solver;
