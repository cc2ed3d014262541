use grownet::engine::{
    augment_features, corrective_step, ensemble_gradients, fit, fit_stage, probability, select_num_learners,
    stage_targets, StageOutcome,
};
use grownet::losses::{self, TaskKind};
use grownet::nn::{LearnerArch, WeakLearner, BN_EPSILON};
use grownet::{synthetic, DataSet, GrowNetModel, Matrix, Metric, RngState, TrainConfig};

fn small_config(task: TaskKind, stages: usize) -> TrainConfig {
    let mut config = TrainConfig::new(task);
    config.learner.hidden_dims = vec![6, 5];
    config.num_stages = stages;
    config.batch_size = 64;
    config
}

fn friedman(n: usize, seed: u64) -> DataSet {
    synthetic::friedman1(n, 1.0, &mut RngState::new(seed)).unwrap()
}

/// Straight-line re-implementation of an eval-mode learner pass on one row.
fn manual_forward(learner: &WeakLearner, row: &[f64]) -> (f64, Vec<f64>) {
    let mut h = row.to_vec();
    for (i, layer) in learner.hidden_layers().iter().enumerate() {
        let w = &layer.dense.weights;
        let mut z: Vec<f64> = (0..w.rows())
            .map(|o| layer.dense.bias[o] + (0..w.cols()).map(|c| w.get(o, c) * h[c]).sum::<f64>())
            .collect();
        if let Some(bn) = &layer.norm {
            for (u, v) in z.iter_mut().enumerate() {
                *v = (*v - bn.running_mean[u]) / (bn.running_var[u] + BN_EPSILON).sqrt() * bn.gamma[u] + bn.beta[u];
            }
        }
        let act = learner.arch().activation_of(i);
        h = z.into_iter().map(|v| act.apply(v)).collect();
    }
    let out = learner.output_layer();
    let score = out.bias[0] + h.iter().enumerate().map(|(c, v)| out.weights.get(0, c) * v).sum::<f64>();
    (score, h)
}

fn manual_predict(model: &GrowNetModel, row: &[f64], k: usize) -> f64 {
    let mut total = model.prior();
    let mut prev: Option<Vec<f64>> = None;
    for (learner, alpha) in model.learners().iter().zip(model.alphas()).take(k) {
        let mut input = row.to_vec();
        if model.is_stacked() {
            if let Some(p) = &prev {
                input.extend_from_slice(p);
            }
        }
        let (score, pen) = manual_forward(learner, &input);
        total += alpha * score;
        prev = Some(pen);
    }
    total
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn learner_bits(l: &WeakLearner) -> Vec<u64> {
    let mut out = bits(&l.params());
    for layer in l.hidden_layers() {
        if let Some(bn) = &layer.norm {
            out.extend(bits(&bn.running_mean));
            out.extend(bits(&bn.running_var));
        }
    }
    out
}

#[test]
fn augmented_width_for_higgs_sized_input() {
    let x = Matrix::zeros(3, 28);
    let pen = Matrix::zeros(3, 16);
    assert_eq!(augment_features(&x, Some(&pen), true).unwrap().cols(), 44);
    assert_eq!(augment_features(&x, Some(&pen), false).unwrap(), x);
    assert_eq!(augment_features(&x, None, true).unwrap(), x);
}

#[test]
fn empty_model_and_zero_alpha_predict_the_prior() {
    let x = Matrix::from_vec(4, 2, vec![0.5, -1.0, 2.0, 3.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
    let mut model = GrowNetModel::new(TaskKind::Regression, 1.25, 2, true);
    assert_eq!(model.predict(&x, None).unwrap(), vec![1.25; 4]);
    let learner = WeakLearner::new(LearnerArch::new(2, vec![3]), &mut RngState::new(0)).unwrap();
    model.push(learner, 0.0).unwrap();
    assert_eq!(model.predict(&x, None).unwrap(), vec![1.25; 4]);
}

#[test]
fn prediction_matches_hand_rolled_chain_for_every_prefix() {
    for stacked in [true, false] {
        let data = friedman(300, 1);
        let mut config = small_config(TaskKind::Regression, 3);
        config.stacked = stacked;
        let (model, _) = fit(&data, &data, &config).unwrap();
        let x = data.features.select_rows(&(0..40).collect::<Vec<_>>());
        for k in 0..=3 {
            let fast = model.predict(&x, Some(k)).unwrap();
            for (r, v) in fast.iter().enumerate() {
                let slow = manual_predict(&model, x.row(r), k);
                assert!((v - slow).abs() <= 1e-10 * slow.abs().max(1.0), "k={k} row {r}: {v} vs {slow}");
            }
        }
    }
}

#[test]
fn prefix_differences_are_single_stage_contributions() {
    let data = friedman(200, 2);
    let (model, _) = fit(&data, &data, &small_config(TaskKind::Regression, 4)).unwrap();
    let chain = model.forward_chain(&data.features, None).unwrap();
    for k in 1..=4 {
        let a = model.predict(&data.features, Some(k)).unwrap();
        let b = model.predict(&data.features, Some(k - 1)).unwrap();
        for r in 0..data.len() {
            let expected = model.alphas()[k - 1] * chain.stage_scores[k - 1][r];
            assert!((a[r] - b[r] - expected).abs() < 1e-12);
        }
    }
    assert!(model.predict(&data.features, Some(5)).is_err());
}

#[test]
fn probabilities() {
    assert_eq!(probability(&[0.0]), vec![0.5]);
    let scores = [-3.0, -0.2, 0.7, 4.0, 20.0];
    let p = probability(&scores);
    for (s, v) in scores.iter().zip(&p) {
        assert!((v - 1.0 / (1.0 + (-2.0 * s).exp())).abs() < 1e-12);
    }
    assert!(p.windows(2).all(|w| w[0] < w[1]));
    let model = GrowNetModel::new(TaskKind::Regression, 0.0, 1, true);
    assert!(model.predict_proba(&Matrix::zeros(1, 1), None).is_err());
}

#[test]
fn regression_stage_targets_are_residuals() {
    let data = friedman(150, 3);
    let config = small_config(TaskKind::Regression, 2);
    let (model, _) = fit(&data, &data, &config).unwrap();
    let stats = stage_targets(&model, &data, None, &config).unwrap();
    let y_hat = model.predict(&data.features, None).unwrap();
    for i in 0..data.len() {
        assert_eq!(stats.y_tilde[i], data.targets[i] - y_hat[i]);
    }
    // Empty model: residuals around the prior.
    let prior = losses::prior(TaskKind::Regression, &data.targets).unwrap();
    let empty = GrowNetModel::new(TaskKind::Regression, prior, 10, true);
    let stats = stage_targets(&empty, &data, None, &config).unwrap();
    for i in 0..data.len() {
        assert_eq!(stats.y_tilde[i], data.targets[i] - prior);
    }
}

#[test]
fn first_order_targets_are_negative_gradients() {
    let data = synthetic::xor_blobs(120, 1.5, 0.5, &mut RngState::new(4)).unwrap();
    let mut config = small_config(TaskKind::BinaryClassification, 1);
    let (model, _) = fit(&data, &data, &config).unwrap();
    config.use_second_order = false;
    let stats = stage_targets(&model, &data, None, &config).unwrap();
    let y_hat = model.predict(&data.features, None).unwrap();
    let exact = losses::classification_stats(&data.targets, &y_hat, config.h_min).unwrap();
    for i in 0..data.len() {
        assert_eq!(stats.y_tilde[i], -exact.g[i]);
        assert_eq!(stats.h[i], 1.0);
    }
}

#[test]
fn row_subsample_uses_exact_count_deterministically() {
    let data = friedman(1000, 5);
    let mut config = small_config(TaskKind::Regression, 1);
    config.row_subsample = 0.1;
    let run = || {
        let prior = losses::prior(config.task, &data.targets).unwrap();
        let mut model = GrowNetModel::new(config.task, prior, 10, true);
        let outcome = fit_stage(&mut model, &data, None, &config, 0, &mut RngState::new(9)).unwrap();
        (outcome, model)
    };
    let (a, model_a) = run();
    let (b, model_b) = run();
    assert!(matches!(a, StageOutcome::Fitted { rows: 100, .. }));
    assert_eq!(a, b);
    assert_eq!(model_a, model_b);
}

#[test]
fn simple_mode_without_corrective_step_leaves_old_learners_alone() {
    let data = friedman(200, 6);
    let mut config = small_config(TaskKind::Regression, 1);
    config.stacked = false;
    config.cs_every = 0;
    let prior = losses::prior(config.task, &data.targets).unwrap();
    let mut model = GrowNetModel::new(config.task, prior, 10, false);
    let mut rng = RngState::new(7);
    let mut snapshots: Vec<Vec<u64>> = Vec::new();
    for stage in 0..4 {
        fit_stage(&mut model, &data, None, &config, stage, &mut rng).unwrap();
        for (old, learner) in snapshots.iter().zip(model.learners()) {
            assert_eq!(old, &learner_bits(learner));
        }
        snapshots = model.learners().iter().map(learner_bits).collect();
    }
}

#[test]
fn frozen_boost_rates_survive_the_corrective_step() {
    let data = friedman(200, 8);
    let mut config = small_config(TaskKind::Regression, 2);
    config.alpha_trainable = false;
    config.alpha_init = 0.1;
    let (mut model, log) = fit(&data, &data, &config).unwrap();
    assert!(log.iter().all(|r| r.alphas.iter().all(|a| a.to_bits() == 0.1f64.to_bits())));
    let before = bits(model.alphas());
    corrective_step(&mut model, &data, None, &config, 2, &mut RngState::new(1)).unwrap();
    assert_eq!(before, bits(model.alphas()));
}

fn two_stage_model(task: TaskKind, stacked: bool, data: &DataSet) -> (GrowNetModel, TrainConfig) {
    let mut config = small_config(task, 2);
    config.stacked = stacked;
    let (model, _) = fit(data, data, &config).unwrap();
    (model, config)
}

#[test]
fn boost_rate_gradient_matches_finite_differences() {
    let data = friedman(40, 10);
    let (model, config) = two_stage_model(TaskKind::Regression, true, &data);
    let (_, _, alpha_grads) = ensemble_gradients(&mut model.clone(), &data.features, &data.targets, None, &config).unwrap();

    // Mean over the batch of dl/dŷ times the stage output, with l = (y − ŷ)².
    let chain = model.clone().forward_chain_train(&data.features, None).unwrap();
    let scores: Vec<Vec<f64>> = chain.forwards.iter().map(|f| f.scores.clone()).collect();
    let y_hat = model.combine(&scores, data.len());
    for k in 0..2 {
        let mean: f64 = (0..data.len())
            .map(|i| 2.0 * (y_hat[i] - data.targets[i]) * scores[k][i])
            .sum::<f64>()
            / data.len() as f64;
        assert!((alpha_grads[k] - mean).abs() <= 1e-12 * mean.abs().max(1.0));

        let step = 1e-6;
        let loss_at = |delta: f64| {
            let mut m = model.clone();
            m.alphas_mut()[k] += delta;
            ensemble_gradients(&mut m, &data.features, &data.targets, None, &config).unwrap().0
        };
        let fd = (loss_at(step) - loss_at(-step)) / (2.0 * step);
        assert!((alpha_grads[k] - fd).abs() / fd.abs() < 1e-5, "alpha {k}: {} vs {fd}", alpha_grads[k]);
    }
}

#[test]
fn ensemble_gradients_reach_earlier_learners_through_stacked_features() {
    for task in [TaskKind::Regression, TaskKind::BinaryClassification] {
        let data = match task {
            TaskKind::Regression => friedman(30, 11),
            _ => synthetic::xor_blobs(30, 1.0, 0.7, &mut RngState::new(11)).unwrap(),
        };
        let (model, config) = two_stage_model(task, true, &data);
        let (_, grads, _) = ensemble_gradients(&mut model.clone(), &data.features, &data.targets, None, &config).unwrap();
        let analytic = grads[0].flatten();
        let step = 1e-5;
        let mut rng = RngState::new(3);
        let count = model.learners()[0].param_count();
        let slice_lens: Vec<usize> = model.clone().learners_mut()[0].params_mut().iter().map(|s| s.len()).collect();
        for _ in 0..25 {
            let flat = (rng.next_u64() % count as u64) as usize;
            let (mut si, mut e) = (0, flat);
            while e >= slice_lens[si] {
                e -= slice_lens[si];
                si += 1;
            }
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                m.learners_mut()[0].params_mut()[si][e] += delta;
                ensemble_gradients(&mut m, &data.features, &data.targets, None, &config).unwrap().0
            };
            let fd = (loss_at(step) - loss_at(-step)) / (2.0 * step);
            let err = (analytic[flat] - fd).abs() / analytic[flat].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-4, "{task:?} param {flat}: analytic {} fd {fd}", analytic[flat]);
        }
    }
}

#[test]
fn single_stage_run_logs_one_record() {
    let data = friedman(100, 12);
    let (model, log) = fit(&data, &data, &small_config(TaskKind::Regression, 1)).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(model.num_learners(), 1);
    assert_eq!(log[0].alphas.len(), 1);
    assert!(log[0].stage_loss.is_finite() && log[0].corrective_loss.is_finite());
}

#[test]
fn training_is_deterministic() {
    let data = synthetic::ranking(12, 10, 5, &mut RngState::new(13)).unwrap();
    let mut config = small_config(TaskKind::ranking(), 3);
    config.record_timing = false;
    let (a, log_a) = fit(&data, &data, &config).unwrap();
    let (b, log_b) = fit(&data, &data, &config).unwrap();
    assert_eq!(grownet::store::to_string(&grownet::store::Archive::new(a.clone())), grownet::store::to_string(&grownet::store::Archive::new(b)));
    assert_eq!(format!("{log_a:?}"), format!("{log_b:?}"));
    config.seed = 1;
    let (c, _) = fit(&data, &data, &config).unwrap();
    assert_ne!(a, c);
}

#[test]
fn seconds_are_zero_without_timing() {
    let data = friedman(80, 14);
    let mut config = small_config(TaskKind::Regression, 2);
    config.record_timing = false;
    let (_, log) = fit(&data, &data, &config).unwrap();
    assert!(log.iter().all(|r| r.seconds == 0.0));
}

/// Simple-mode model of learners that each output a constant.
fn constant_model(increments: &[f64]) -> GrowNetModel {
    let mut model = GrowNetModel::new(TaskKind::Regression, 0.0, 1, false);
    let mut rng = RngState::new(0);
    for &c in increments {
        let mut learner = WeakLearner::new(LearnerArch::new(1, vec![2]), &mut rng).unwrap();
        let out = learner.output_layer_mut();
        out.weights.as_mut_slice().fill(0.0);
        out.bias[0] = c;
        model.push(learner, 1.0).unwrap();
    }
    model
}

#[test]
fn validation_prefix_selection() {
    let val = DataSet::new(Matrix::zeros(3, 1), vec![10.0; 3], None).unwrap();
    let improving = constant_model(&[2.0, 2.0, 2.0, 2.0]);
    assert_eq!(select_num_learners(&improving, &val, Metric::Rmse).unwrap(), 4);
    let peaked = constant_model(&[4.0, 4.0, 2.0, 3.0, 3.0]);
    assert_eq!(select_num_learners(&peaked, &val, Metric::Rmse).unwrap(), 3);
    let tied = constant_model(&[5.0, 4.0, 4.0, -1.0, -1.0]);
    assert_eq!(select_num_learners(&tied, &val, Metric::Rmse).unwrap(), 2);
    let empty = constant_model(&[]);
    assert_eq!(select_num_learners(&empty, &val, Metric::Rmse).unwrap(), 0);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let data = friedman(50, 15);
    let mut config = small_config(TaskKind::Regression, 1);
    let other = DataSet::new(Matrix::zeros(5, 3), vec![0.0; 5], None).unwrap();
    assert!(fit(&data, &other, &config).is_err());
    config.num_stages = 0;
    assert!(fit(&data, &data, &config).is_err());
    let ranking = TrainConfig::new(TaskKind::ranking());
    assert!(fit(&data, &data, &ranking).is_err());
}
