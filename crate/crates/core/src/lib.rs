//! Gradient boosting with shallow neural networks as weak learners.
//!
//! Each stage fits a small MLP to second-order (Newton) targets of the task
//! loss, optionally feeding it the previous learner's penultimate features,
//! and a corrective step then refines all learners and their boost rates
//! end to end. Regression, binary classification and pairwise ranking are
//! supported.

pub mod data;
pub mod engine;
pub mod error;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod store;
pub mod synthetic;

pub use data::DataSet;
pub use engine::{fit, GrowNetModel, StageLogRecord, TrainConfig};
pub use error::{Error, Result};
pub use losses::TaskKind;
pub use matrix::Matrix;
pub use metrics::{Metric, QueryGroups};
pub use rng::RngState;
