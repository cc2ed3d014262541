use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{TaskKind, DEFAULT_H_MIN, DEFAULT_MAX_PAIRS_PER_QUERY};
use crate::metrics::Metric;
use crate::nn::{Activation, LearnerArch};

/// Weak-learner shape without the input width, which depends on the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub penultimate_activation: Activation,
    pub use_batch_norm: bool,
}

impl LearnerSpec {
    pub fn new(hidden_dims: Vec<usize>) -> Self {
        Self {
            hidden_dims,
            activation: Activation::leaky_relu(),
            penultimate_activation: Activation::Relu,
            use_batch_norm: true,
        }
    }

    pub fn arch(&self, input_dim: usize) -> LearnerArch {
        LearnerArch {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            activation: self.activation,
            penultimate_activation: self.penultimate_activation,
            use_batch_norm: self.use_batch_norm,
        }
    }
}

/// Every knob of a boosting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub learner: LearnerSpec,
    /// Concatenate the previous learner's penultimate features to the input.
    pub stacked: bool,
    pub num_stages: usize,
    pub stage_epochs: usize,
    pub cs_epochs: usize,
    /// Run the corrective step after every `cs_every`-th stage; 0 disables it.
    pub cs_every: usize,
    pub stage_lr: f64,
    pub cs_lr: f64,
    /// Halve both learning rates every this many stages; 0 disables.
    pub lr_halving_period: usize,
    pub batch_size: usize,
    pub alpha_init: f64,
    pub alpha_trainable: bool,
    pub use_second_order: bool,
    /// Fraction of rows each stage's learner is fitted on.
    pub row_subsample: f64,
    pub h_min: f64,
    pub l2: f64,
    /// Let corrective-step gradients flow into earlier learners through the
    /// stacked penultimate features.
    pub cs_backprop_stacked: bool,
    pub max_pairs_per_query: usize,
    pub metric: Metric,
    /// Store wall-clock seconds in the stage log (zero when off).
    pub record_timing: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for `task`; ranking trains two corrective epochs and uses a
    /// ReLU6 penultimate layer.
    pub fn new(task: TaskKind) -> Self {
        let mut learner = LearnerSpec::new(vec![16, 16]);
        let (cs_epochs, metric) = match task {
            TaskKind::Regression => (1, Metric::Rmse),
            TaskKind::BinaryClassification => (1, Metric::Auc),
            TaskKind::PairwiseRanking { .. } => {
                learner.penultimate_activation = Activation::Relu6;
                (2, Metric::Ndcg { k: 5 })
            }
        };
        Self {
            task,
            learner,
            stacked: true,
            num_stages: 40,
            stage_epochs: 1,
            cs_epochs,
            cs_every: 1,
            stage_lr: 0.005,
            cs_lr: 0.005,
            lr_halving_period: 15,
            batch_size: 2048,
            alpha_init: 1.0,
            alpha_trainable: true,
            use_second_order: true,
            row_subsample: 1.0,
            h_min: DEFAULT_H_MIN,
            l2: 0.001,
            cs_backprop_stacked: true,
            max_pairs_per_query: DEFAULT_MAX_PAIRS_PER_QUERY,
            metric,
            record_timing: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.learner.arch(1).validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.num_stages == 0 {
            return Err(Error::Config("num_stages must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        positive("stage_lr", self.stage_lr)?;
        positive("cs_lr", self.cs_lr)?;
        positive("h_min", self.h_min)?;
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return Err(Error::Config(format!(
                "row_subsample must lie in (0, 1], got {}",
                self.row_subsample
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !self.alpha_init.is_finite() {
            return Err(Error::Config("alpha_init must be finite".into()));
        }
        if self.max_pairs_per_query == 0 {
            return Err(Error::Config("max_pairs_per_query must be at least 1".into()));
        }
        if !self.metric.fits(self.task) {
            return Err(Error::Config(format!(
                "metric {} does not fit a {} task",
                self.metric,
                self.task.name()
            )));
        }
        if let Metric::Ndcg { k: 0 } = self.metric {
            return Err(Error::Config("ndcg cutoff must be at least 1".into()));
        }
        Ok(())
    }

    fn lr_scale(&self, stage: usize) -> f64 {
        if self.lr_halving_period == 0 {
            1.0
        } else {
            0.5f64.powi((stage / self.lr_halving_period) as i32)
        }
    }

    /// Learning rate for fitting the learner of zero-based `stage`.
    pub fn stage_learning_rate(&self, stage: usize) -> f64 {
        self.stage_lr * self.lr_scale(stage)
    }

    /// Learning rate for the corrective step that follows zero-based `stage`.
    pub fn cs_learning_rate(&self, stage: usize) -> f64 {
        self.cs_lr * self.lr_scale(stage)
    }

    /// Whether the corrective step runs after zero-based `stage`.
    pub fn runs_corrective_step(&self, stage: usize) -> bool {
        self.cs_every > 0 && (stage + 1).is_multiple_of(self.cs_every)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLogRecord {
    /// Zero-based stage index.
    pub stage: usize,
    /// Mean weighted squared error of the new learner over its final epoch;
    /// zero when the stage was skipped.
    pub stage_loss: f64,
    /// Final-epoch corrective loss, or the ensemble's training task loss
    /// when no corrective step ran after this stage.
    pub corrective_loss: f64,
    pub val_metric: f64,
    pub alphas: Vec<f64>,
    pub seconds: f64,
}
