//! Dense tensors with reverse-mode differentiation, dense layers, Adam and
//! the checkpoint archive.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod nn;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, GradSum};
pub use checkpoint::Checkpoint;
pub use gradcheck::{check_gradients, check_gradients_f64, op_suite, op_suite_names, GradCheck};
pub use nn::{mlp_forward, Activation, Binder, Init, Linear, Mlp, ParamId, ParamStore, Trainable};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;
