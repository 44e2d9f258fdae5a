//! Joint-focused occupancy samples, the implicit decoder, its losses and
//! the staged training schedule.

mod decoder;
mod loss;
mod train;
mod volume;

pub use decoder::{ImplicitDecoder, DECODER_HIDDEN};
pub use loss::{loss_match, loss_match_on_tape, loss_mse, loss_mse_on_tape, LossConfig};
pub use train::{
    chamfer_on_tape, joint_iou, joint_loss, pretrain_encoders, train_joint, JointExample, JointModel, JointPartInput,
    JointReport, JointTrainConfig, PretrainConfig, SampleSchedule, StepSchedule, TrainReport,
};
pub use volume::{
    build_joint_volume, eroded_interior, sample_training_points, select_joint_boundary, JointBoundarySet,
    SampleFractions, TrainingSampleSet, DILATION_STEPS,
};
