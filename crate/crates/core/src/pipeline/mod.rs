//! End-to-end data generation, training, assembly and evaluation.

pub mod assemble;
pub mod config;
pub mod evaluate;
pub mod metrics;
pub mod models;
pub mod perturb;
pub mod prep;
pub mod synth;
pub mod train;

pub use assemble::{assemble_parts, run_assemble, AssembleRequest, Assembly, InputPart, Models, PartSpec, RunManifest};
pub use config::PipelineConfig;
pub use evaluate::{evaluate_suite, EvalReport, STAGES};
pub use metrics::{chamfer_meshes, chamfer_points, grid_iou};
pub use perturb::{perturb_shape, perturb_similarity, perturb_sine, PerturbConfig, Perturbation};
pub use prep::{load_prepared, prepare_shape, preprocess_dataset, PartPrep, PreparedData, PreparedShape};
pub use synth::{generate_synthetic, DatasetManifest, LabeledShape, ShapePart};
pub use train::{run_pretrain, run_train_align, run_train_joint};
