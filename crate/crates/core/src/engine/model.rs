use crate::error::{Error, Result};
use crate::losses::{sigmoid, TaskKind};
use crate::matrix::Matrix;
use crate::nn::{Forward, ForwardCache, WeakLearner};

/// Additive ensemble `ŷ = f₀ + Σₖ αₖ fₖ(inputₖ)`.
///
/// In stacked mode learner `k > 0` sees the raw features concatenated with
/// the penultimate activations of learner `k − 1`; otherwise every learner
/// sees the raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowNetModel {
    pub(crate) task: TaskKind,
    pub(crate) prior: f64,
    pub(crate) learners: Vec<WeakLearner>,
    pub(crate) alphas: Vec<f64>,
    pub(crate) stacked: bool,
    pub(crate) feature_dim: usize,
}

/// Per-learner outputs of an inference pass through the chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// `stage_scores[k]` holds `fₖ(inputₖ)` for every row.
    pub stage_scores: Vec<Vec<f64>>,
    /// Penultimate activations of the last learner evaluated.
    pub last_penultimate: Option<Matrix>,
}

/// Train-mode pass through the chain, kept for backpropagation.
#[derive(Debug)]
pub struct TrainChain {
    pub forwards: Vec<Forward>,
    pub caches: Vec<ForwardCache>,
}

/// Input for the learner that follows `prev_penultimate`'s owner.
///
/// Without a previous learner, or in simple mode, this is `x` itself.
pub fn augment_features(x: &Matrix, prev_penultimate: Option<&Matrix>, stacked: bool) -> Result<Matrix> {
    match prev_penultimate {
        Some(p) if stacked => x.hconcat(p),
        _ => Ok(x.clone()),
    }
}

impl GrowNetModel {
    pub fn new(task: TaskKind, prior: f64, feature_dim: usize, stacked: bool) -> Self {
        Self {
            task,
            prior,
            learners: Vec::new(),
            alphas: Vec::new(),
            stacked,
            feature_dim,
        }
    }

    /// Reassemble a model, checking that learner input widths chain correctly.
    pub fn from_parts(
        task: TaskKind,
        prior: f64,
        feature_dim: usize,
        stacked: bool,
        learners: Vec<WeakLearner>,
        alphas: Vec<f64>,
    ) -> Result<Self> {
        if learners.len() != alphas.len() {
            return Err(Error::Shape(format!(
                "{} learners but {} boost rates",
                learners.len(),
                alphas.len()
            )));
        }
        let mut model = Self::new(task, prior, feature_dim, stacked);
        for (learner, alpha) in learners.into_iter().zip(alphas) {
            model.push(learner, alpha)?;
        }
        Ok(model)
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn learners(&self) -> &[WeakLearner] {
        &self.learners
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alphas_mut(&mut self) -> &mut [f64] {
        &mut self.alphas
    }

    pub fn learners_mut(&mut self) -> &mut [WeakLearner] {
        &mut self.learners
    }

    pub fn is_stacked(&self) -> bool {
        self.stacked
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_learners(&self) -> usize {
        self.learners.len()
    }

    /// Input width the next appended learner must accept.
    pub fn next_input_dim(&self) -> usize {
        match self.learners.last() {
            Some(prev) if self.stacked => self.feature_dim + prev.penultimate_dim(),
            _ => self.feature_dim,
        }
    }

    pub fn push(&mut self, learner: WeakLearner, alpha: f64) -> Result<()> {
        let expected = self.next_input_dim();
        if learner.input_dim() != expected {
            return Err(Error::Shape(format!(
                "learner {} takes {} inputs, expected {expected}",
                self.learners.len(),
                learner.input_dim()
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::Numeric(format!("boost rate {alpha} is not finite")));
        }
        self.learners.push(learner);
        self.alphas.push(alpha);
        Ok(())
    }

    fn check_features(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.feature_dim {
            return Err(Error::Shape(format!(
                "model expects {} features, data has {}",
                self.feature_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    fn resolve_count(&self, num_learners: Option<usize>) -> Result<usize> {
        let k = num_learners.unwrap_or(self.learners.len());
        if k > self.learners.len() {
            return Err(Error::Input(format!(
                "asked for {k} learners, model has {}",
                self.learners.len()
            )));
        }
        Ok(k)
    }

    /// Eval-mode pass through the first `num_learners` learners.
    pub fn forward_chain(&self, x: &Matrix, num_learners: Option<usize>) -> Result<ChainOutput> {
        self.check_features(x)?;
        let k = self.resolve_count(num_learners)?;
        let mut stage_scores = Vec::with_capacity(k);
        let mut penultimate: Option<Matrix> = None;
        for learner in &self.learners[..k] {
            let input = augment_features(x, penultimate.as_ref(), self.stacked)?;
            let out = learner.forward_eval(&input)?;
            stage_scores.push(out.scores);
            penultimate = Some(out.penultimate);
        }
        Ok(ChainOutput {
            stage_scores,
            last_penultimate: penultimate,
        })
    }

    /// Train-mode pass through the first `num_learners` learners. Updates
    /// batch-norm running statistics.
    pub fn forward_chain_train(&mut self, x: &Matrix, num_learners: Option<usize>) -> Result<TrainChain> {
        self.check_features(x)?;
        let k = self.resolve_count(num_learners)?;
        let mut forwards: Vec<Forward> = Vec::with_capacity(k);
        let mut caches = Vec::with_capacity(k);
        for learner in &mut self.learners[..k] {
            let input = augment_features(x, forwards.last().map(|f| &f.penultimate), self.stacked)?;
            let (fwd, cache) = learner.forward_train(&input)?;
            forwards.push(fwd);
            caches.push(cache);
        }
        Ok(TrainChain { forwards, caches })
    }

    /// Combine per-learner outputs into ensemble scores.
    pub fn combine(&self, stage_scores: &[Vec<f64>], rows: usize) -> Vec<f64> {
        let mut out = vec![self.prior; rows];
        for (scores, alpha) in stage_scores.iter().zip(&self.alphas) {
            for (o, s) in out.iter_mut().zip(scores) {
                *o += alpha * s;
            }
        }
        out
    }

    /// Ensemble scores using the first `num_learners` learners (all when `None`).
    pub fn predict(&self, x: &Matrix, num_learners: Option<usize>) -> Result<Vec<f64>> {
        let chain = self.forward_chain(x, num_learners)?;
        Ok(self.combine(&chain.stage_scores, x.rows()))
    }

    /// `P(y = +1 | x) = 1 / (1 + e^{−2ŷ})` for binary classification models.
    pub fn predict_proba(&self, x: &Matrix, num_learners: Option<usize>) -> Result<Vec<f64>> {
        if self.task != TaskKind::BinaryClassification {
            return Err(Error::Input(format!(
                "probabilities are only defined for classification, model task is {}",
                self.task.name()
            )));
        }
        Ok(probability(&self.predict(x, num_learners)?))
    }
}

pub fn probability(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|s| sigmoid(2.0 * s)).collect()
}
