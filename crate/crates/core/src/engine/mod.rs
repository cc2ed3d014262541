//! Boosting orchestration: stage fitting, corrective step, prediction.

mod config;
mod model;
mod train;

pub use config::{LearnerSpec, StageLogRecord, TrainConfig};
pub use model::{augment_features, probability, ChainOutput, GrowNetModel, TrainChain};
pub use train::{
    corrective_step, ensemble_gradients, evaluate, fit, fit_stage, pairs_for, select_num_learners,
    stage_targets, training_loss, StageOutcome,
};
