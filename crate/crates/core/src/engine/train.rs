//! Stage-wise Newton boosting with a fully corrective refinement step.

use std::time::Instant;

use crate::data::DataSet;
use crate::engine::config::{StageLogRecord, TrainConfig};
use crate::engine::model::{augment_features, GrowNetModel};
use crate::error::{Error, Result};
use crate::losses::{self, GradHessBatch, PairSet, TaskKind};
use crate::matrix::Matrix;
use crate::metrics::Metric;
use crate::nn::{
    fit_weighted_lsq_with, minibatches, AdamConfig, AdamState, LsqOptions, LsqOutcome, WeakLearner,
};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageOutcome {
    /// A learner was appended; `loss` is its final-epoch weighted squared
    /// error over the `rows` training rows it saw.
    Fitted { loss: f64, rows: usize },
    /// Every Newton weight was zero, so no learner was added.
    Skipped,
}

fn check_data(model: &GrowNetModel, data: &DataSet, pairs: Option<&PairSet>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Input("training data is empty".into()));
    }
    if data.feature_dim() != model.feature_dim() {
        return Err(Error::Shape(format!(
            "model expects {} features, data has {}",
            model.feature_dim(),
            data.feature_dim()
        )));
    }
    if model.task().is_ranking() && (pairs.is_none() || data.groups.is_none()) {
        return Err(Error::Input("ranking needs query groups and document pairs".into()));
    }
    Ok(())
}

/// Gradient statistics and Newton targets of the current ensemble on `data`.
pub fn stage_targets(
    model: &GrowNetModel,
    data: &DataSet,
    pairs: Option<&PairSet>,
    config: &TrainConfig,
) -> Result<GradHessBatch> {
    let y_hat = model.predict(&data.features, None)?;
    let stats = match model.task() {
        TaskKind::Regression => losses::regression_stats(&data.targets, &y_hat)?,
        TaskKind::BinaryClassification => losses::classification_stats(&data.targets, &y_hat, config.h_min)?,
        TaskKind::PairwiseRanking { sigma0 } => {
            let pairs = pairs.ok_or_else(|| Error::Input("ranking needs document pairs".into()))?;
            losses::ranking_stats(&y_hat, pairs, sigma0, config.h_min)?
        }
    };
    Ok(if config.use_second_order {
        stats
    } else {
        stats.first_order()
    })
}

/// Fit one new weak learner to the Newton targets and append it with
/// boost rate `alpha_init`.
pub fn fit_stage(
    model: &mut GrowNetModel,
    data: &DataSet,
    pairs: Option<&PairSet>,
    config: &TrainConfig,
    stage: usize,
    rng: &mut RngState,
) -> Result<StageOutcome> {
    check_data(model, data, pairs)?;
    let stats = stage_targets(model, data, pairs, config)?;

    let rows: Vec<usize> = if config.row_subsample < 1.0 {
        let keep = ((data.len() as f64 * config.row_subsample).round() as usize).max(1);
        rng.sample_indices(data.len(), keep)
    } else {
        (0..data.len()).collect()
    };
    let targets: Vec<f64> = rows.iter().map(|&i| stats.y_tilde[i]).collect();
    let weights: Vec<f64> = rows.iter().map(|&i| stats.h[i]).collect();

    let arch = config.learner.arch(model.next_input_dim());
    let mut learner = WeakLearner::new(arch, rng)?;
    let mut adam = AdamState::new(AdamConfig::new(config.stage_learning_rate(stage), config.l2));
    let options = LsqOptions {
        epochs: config.stage_epochs,
        batch_size: config.batch_size,
    };
    let needs_chain = model.is_stacked() && model.num_learners() > 0;
    let outcome = fit_weighted_lsq_with(
        &mut learner,
        rows.len(),
        |batch| {
            let original: Vec<usize> = batch.iter().map(|&b| rows[b]).collect();
            let x = data.features.select_rows(&original);
            if !needs_chain {
                return Ok(x);
            }
            let chain = model.forward_chain_train(&x, None)?;
            augment_features(&x, chain.forwards.last().map(|f| &f.penultimate), true)
        },
        &targets,
        &weights,
        options,
        &mut adam,
        rng,
    )?;
    match outcome {
        LsqOutcome::ZeroWeights => {
            log::warn!("stage {stage}: all second-order weights are zero, no learner added");
            Ok(StageOutcome::Skipped)
        }
        LsqOutcome::Trained { loss, .. } => {
            model.push(learner, config.alpha_init)?;
            Ok(StageOutcome::Fitted { loss, rows: rows.len() })
        }
    }
}

/// Mini-batches for the corrective step: shuffled rows, or shuffled whole
/// queries for ranking. Each batch carries its row indices and, for ranking,
/// its re-indexed pairs.
fn corrective_batches(
    data: &DataSet,
    pairs: Option<&PairSet>,
    batch_size: usize,
    rng: &mut RngState,
) -> Vec<(Vec<usize>, Option<PairSet>)> {
    match (&data.groups, pairs) {
        (Some(groups), Some(pairs)) => {
            let order = rng.permutation(groups.num_queries());
            let mut batches: Vec<Vec<usize>> = Vec::new();
            let mut current = Vec::new();
            let mut rows = 0;
            for q in order {
                current.push(q);
                rows += groups.range(q).len();
                if rows >= batch_size {
                    batches.push(std::mem::take(&mut current));
                    rows = 0;
                }
            }
            if !current.is_empty() {
                if rows < 2 && !batches.is_empty() {
                    batches.last_mut().expect("non-empty").extend(current);
                } else {
                    batches.push(current);
                }
            }
            batches
                .into_iter()
                .map(|qs| {
                    let idx = qs.iter().flat_map(|&q| groups.range(q)).collect();
                    let sub = pairs.subset(&qs, groups);
                    (idx, Some(sub))
                })
                .collect()
        }
        _ => {
            let order = rng.permutation(data.len());
            minibatches(&order, batch_size)
                .into_iter()
                .map(|b| (b.to_vec(), None))
                .collect()
        }
    }
}

/// Refine every learner and (optionally) every boost rate against the task
/// loss of the full ensemble. Returns the mean loss over the final epoch.
pub fn corrective_step(
    model: &mut GrowNetModel,
    data: &DataSet,
    pairs: Option<&PairSet>,
    config: &TrainConfig,
    stage: usize,
    rng: &mut RngState,
) -> Result<f64> {
    check_data(model, data, pairs)?;
    if model.num_learners() == 0 {
        return Err(Error::Input("corrective step on a model without learners".into()));
    }
    let mut adam = AdamState::new(AdamConfig::new(config.cs_learning_rate(stage), config.l2));
    let mut final_loss = f64::NAN;
    for _ in 0..config.cs_epochs {
        let mut total = 0.0;
        let mut weight = 0.0;
        for (rows, batch_pairs) in corrective_batches(data, pairs, config.batch_size, rng) {
            if batch_pairs.as_ref().is_some_and(|p| p.num_pairs() == 0) {
                continue;
            }
            let x = data.features.select_rows(&rows);
            let targets: Vec<f64> = rows.iter().map(|&i| data.targets[i]).collect();
            let (loss, grads, alpha_grads) = ensemble_gradients(model, &x, &targets, batch_pairs.as_ref(), config)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("corrective loss became {loss} at stage {stage}")));
            }
            let w = batch_pairs.as_ref().map_or(rows.len(), PairSet::num_pairs) as f64;
            total += loss * w;
            weight += w;

            let mut params: Vec<&mut [f64]> = model.learners.iter_mut().flat_map(|l| l.params_mut()).collect();
            let mut grad_slices: Vec<&[f64]> = grads.iter().flat_map(|g| g.slices()).collect();
            if config.alpha_trainable {
                params.push(model.alphas.as_mut_slice());
                grad_slices.push(&alpha_grads);
            }
            adam.step(&mut params, &grad_slices)?;
        }
        if weight > 0.0 {
            final_loss = total / weight;
        }
    }
    Ok(final_loss)
}

/// Task loss on one batch and its gradients for every learner and boost rate.
pub fn ensemble_gradients(
    model: &mut GrowNetModel,
    x: &Matrix,
    targets: &[f64],
    pairs: Option<&PairSet>,
    config: &TrainConfig,
) -> Result<(f64, Vec<crate::nn::Gradients>, Vec<f64>)> {
    let chain = model.forward_chain_train(x, None)?;
    let stage_scores: Vec<Vec<f64>> = chain.forwards.iter().map(|f| f.scores.clone()).collect();
    let y_hat = model.combine(&stage_scores, x.rows());
    let (loss, d_yhat) = losses::corrective_loss_grad(model.task(), targets, pairs, &y_hat)?;

    let k = model.num_learners();
    let d = model.feature_dim();
    let propagate = model.is_stacked() && config.cs_backprop_stacked;
    let mut alpha_grads = vec![0.0; k];
    let mut grads = Vec::with_capacity(k);
    let mut d_penultimate: Option<Matrix> = None;
    for i in (0..k).rev() {
        let alpha = model.alphas[i];
        alpha_grads[i] = d_yhat.iter().zip(&stage_scores[i]).map(|(g, s)| g * s).sum();
        let d_scores: Vec<f64> = d_yhat.iter().map(|g| alpha * g).collect();
        let (g, d_input) = model.learners[i].backward(&chain.caches[i], &d_scores, d_penultimate.as_ref())?;
        d_penultimate = (propagate && i > 0).then(|| d_input.column_range(d, d_input.cols()));
        grads.push(g);
    }
    grads.reverse();
    Ok((loss, grads, alpha_grads))
}

/// Task loss of the ensemble on `data` in eval mode.
pub fn training_loss(model: &GrowNetModel, data: &DataSet, pairs: Option<&PairSet>) -> Result<f64> {
    let y_hat = model.predict(&data.features, None)?;
    losses::corrective_loss(model.task(), &data.targets, pairs, &y_hat)
}

/// Evaluate `metric` for the full ensemble on `data`.
pub fn evaluate(model: &GrowNetModel, data: &DataSet, metric: Metric, num_learners: Option<usize>) -> Result<f64> {
    let scores = model.predict(&data.features, num_learners)?;
    metric.evaluate(&scores, &data.targets, data.groups.as_ref())
}

/// Document pairs for ranking data, `None` for other tasks.
pub fn pairs_for(data: &DataSet, config: &TrainConfig, rng: &mut RngState) -> Result<Option<PairSet>> {
    if !config.task.is_ranking() {
        return Ok(None);
    }
    let groups = data
        .groups
        .as_ref()
        .ok_or_else(|| Error::Input("ranking data needs query groups".into()))?;
    losses::build_pairs(&data.targets, groups, config.max_pairs_per_query, rng).map(Some)
}

/// Full training run: prior, then `num_stages` rounds of stage fitting and
/// scheduled corrective steps, logging one record per stage.
pub fn fit(data: &DataSet, val_data: &DataSet, config: &TrainConfig) -> Result<(GrowNetModel, Vec<StageLogRecord>)> {
    config.validate()?;
    if data.is_empty() || val_data.is_empty() {
        return Err(Error::Input("training and validation data must be non-empty".into()));
    }
    if val_data.feature_dim() != data.feature_dim() {
        return Err(Error::Shape(format!(
            "validation data has {} features, training data {}",
            val_data.feature_dim(),
            data.feature_dim()
        )));
    }
    let mut rng = RngState::new(config.seed);
    let pairs = pairs_for(data, config, &mut rng)?;
    if pairs.as_ref().is_some_and(|p| p.num_pairs() == 0) {
        return Err(Error::Input("no query in the training data has documents of different grades".into()));
    }
    let prior = losses::prior(config.task, &data.targets)?;
    let mut model = GrowNetModel::new(config.task, prior, data.feature_dim(), config.stacked);
    let mut log = Vec::with_capacity(config.num_stages);

    for stage in 0..config.num_stages {
        let started = Instant::now();
        let stage_loss = match fit_stage(&mut model, data, pairs.as_ref(), config, stage, &mut rng)? {
            StageOutcome::Fitted { loss, .. } => loss,
            StageOutcome::Skipped => 0.0,
        };
        let corrective_loss = if config.runs_corrective_step(stage) && model.num_learners() > 0 {
            corrective_step(&mut model, data, pairs.as_ref(), config, stage, &mut rng)?
        } else {
            training_loss(&model, data, pairs.as_ref())?
        };
        let val_metric = evaluate(&model, val_data, config.metric, None)?;
        let seconds = if config.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        log::info!(
            "stage {stage}: stage loss {stage_loss:.6}, corrective loss {corrective_loss:.6}, val {} {val_metric:.6}",
            config.metric
        );
        log.push(StageLogRecord {
            stage,
            stage_loss,
            corrective_loss,
            val_metric,
            alphas: model.alphas().to_vec(),
            seconds,
        });
    }
    Ok((model, log))
}

/// Number of leading learners that scores best on `val_data`; ties go to
/// the shorter prefix.
pub fn select_num_learners(model: &GrowNetModel, val_data: &DataSet, metric: Metric) -> Result<usize> {
    if val_data.is_empty() {
        return Err(Error::Input("validation data is empty".into()));
    }
    let chain = model.forward_chain(&val_data.features, None)?;
    let mut scores = vec![model.prior(); val_data.len()];
    let mut best: Option<(usize, f64)> = None;
    for (k, (stage, alpha)) in chain.stage_scores.iter().zip(model.alphas()).enumerate() {
        for (acc, s) in scores.iter_mut().zip(stage) {
            *acc += alpha * s;
        }
        let value = metric.evaluate(&scores, &val_data.targets, val_data.groups.as_ref())?;
        if best.is_none_or(|(_, b)| metric.improves(value, b)) {
            best = Some((k + 1, value));
        }
    }
    Ok(best.map_or(0, |(k, _)| k))
}
