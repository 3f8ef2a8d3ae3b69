//! Pooled-feature classifier: MLP head, optional learnable EST kernel, Adam,
//! early stopping and k-fold cross-validation.

mod adam;
mod checkpoint;
mod fit;
mod model;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{config_hash, read_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use fit::{
    cross_validate, fit, loss_and_accuracy, positive_class, predict_split, CrossValidation, EpochStats, FoldResult,
    TrainConfig, TrainRecord,
};
pub use model::{forward, loss_and_grad, predict, softmax, Gradient, Mode, ModelParams, SampleInput, Standardizer, PROB_FLOOR};
