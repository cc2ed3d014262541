//! Run configuration: a flat TOML file whose keys can each be overridden by
//! the command-line flag of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use grownet::nn::Activation;
use grownet::{Metric, TaskKind, TrainConfig};

pub const SEED_ENV: &str = "GROWNET_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
    Ranking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Svmlight,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penultimate {
    Relu,
    Relu6,
}

/// Every option of `train` and `ablate`. Unset options fall back to the
/// task's defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,

    /// Training data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// Validation data; without it `val-fraction` of the training data is held out.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Data format; inferred from the file extension when unset.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    /// Delimited files start with a header row.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header: Option<bool>,
    /// Zero-based target column of delimited files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_column: Option<usize>,
    /// Raw label mapped to +1 for classification (others become -1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
    /// Standardize features with training-set statistics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,

    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaky_slope: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penultimate_activation: Option<Penultimate>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_norm: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stacked: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_stages: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs_epochs: Option<usize>,
    /// Corrective step after every n-th stage; 0 disables it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs_lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_halving_period: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_init: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_trainable: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_order: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_subsample: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs_backprop_stacked: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pairs_per_query: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    /// Model-selection metric: rmse, auc, ndcg or ndcg@k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    /// Defaults to $GROWNET_SEED, then 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Record wall-clock seconds in the log; off gives byte-identical logs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_timing: Option<bool>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_out: Option<PathBuf>,
}

impl RunConfig {
    /// Read `path` (if any) and apply `flags` on top.
    pub fn resolve(path: Option<&Path>, flags: &RunConfig) -> Result<RunConfig> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let table: toml::Table = text.parse().with_context(|| format!("parsing {}", p.display()))?;
                // Reject unknown keys before merging.
                RunConfig::deserialize(table.clone()).with_context(|| format!("in {}", p.display()))?;
                table
            }
            None => toml::Table::new(),
        };
        let overrides = toml::Table::try_from(flags).context("encoding command-line flags")?;
        table.extend(overrides);
        Ok(RunConfig::deserialize(table)?)
    }

    pub fn task(&self) -> Result<Task> {
        self.task.context("no task given (set `task` in the config or pass --task)")
    }

    pub fn task_kind(&self) -> Result<TaskKind> {
        Ok(match self.task()? {
            Task::Regression => TaskKind::Regression,
            Task::Classification => TaskKind::BinaryClassification,
            Task::Ranking => TaskKind::PairwiseRanking {
                sigma0: self.sigma0.unwrap_or(grownet::losses::DEFAULT_SIGMA0),
            },
        })
    }

    /// Training hyperparameters: task defaults overridden by set keys.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.task_kind()?);
        if let Some(v) = &self.hidden_dims {
            c.learner.hidden_dims = v.clone();
        }
        if let Some(v) = self.leaky_slope {
            c.learner.activation = Activation::LeakyRelu { slope: v };
        }
        if let Some(v) = self.penultimate_activation {
            c.learner.penultimate_activation = match v {
                Penultimate::Relu => Activation::Relu,
                Penultimate::Relu6 => Activation::Relu6,
            };
        }
        macro_rules! set {
            ($($key:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$key { c.$field = v; })*
            };
        }
        set!(
            stacked => stacked,
            num_stages => num_stages,
            stage_epochs => stage_epochs,
            cs_epochs => cs_epochs,
            cs_every => cs_every,
            stage_lr => stage_lr,
            cs_lr => cs_lr,
            lr_halving_period => lr_halving_period,
            batch_size => batch_size,
            alpha_init => alpha_init,
            alpha_trainable => alpha_trainable,
            second_order => use_second_order,
            row_subsample => row_subsample,
            h_min => h_min,
            l2 => l2,
            cs_backprop_stacked => cs_backprop_stacked,
            max_pairs_per_query => max_pairs_per_query,
            record_timing => record_timing,
        );
        if let Some(v) = self.batch_norm {
            c.learner.use_batch_norm = v;
        }
        if let Some(m) = &self.metric {
            c.metric = Metric::parse(m)?;
        }
        c.seed = match self.seed {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an integer"))?,
                Err(_) => 0,
            },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn val_fraction(&self) -> Result<f64> {
        let f = self.val_fraction.unwrap_or(0.2);
        if !(f > 0.0 && f < 1.0) {
            bail!("val-fraction must lie in (0, 1), got {f}");
        }
        Ok(f)
    }
}
