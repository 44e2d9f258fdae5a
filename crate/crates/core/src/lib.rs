pub mod align;
pub mod autodiff;
pub mod encoders;
pub mod error;
pub mod geom;
pub mod jointsynth;
pub mod meshkit;
pub mod pipeline;
pub mod refine;
pub mod scalar;
pub mod surfacing;

pub use error::{Error, Result};
pub use scalar::Real;

/// Tensor element type used by the training and assembly pipeline.
pub type Scalar = f32;
/// Parameter store of pipeline models.
pub type Params = autodiff::ParamStore<Scalar>;
/// Checkpoint of pipeline models.
pub type ModelCheckpoint = autodiff::Checkpoint<Scalar>;
