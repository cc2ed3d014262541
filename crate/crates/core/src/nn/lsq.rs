use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{minibatches, AdamState, WeakLearner};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LsqOutcome {
    /// `loss` is the mean weighted squared error over the final epoch.
    Trained { loss: f64, steps: u64 },
    /// Every weight was zero; the learner was left untouched.
    ZeroWeights,
}

/// Train `learner` to minimize `(1/B) Σ wᵢ (targetᵢ − f(xᵢ))²` with mini-batch Adam.
pub fn fit_weighted_lsq(
    learner: &mut WeakLearner,
    inputs: &Matrix,
    targets: &[f64],
    weights: &[f64],
    options: LsqOptions,
    adam: &mut AdamState,
    rng: &mut RngState,
) -> Result<LsqOutcome> {
    fit_weighted_lsq_with(
        learner,
        inputs.rows(),
        |rows| Ok(inputs.select_rows(rows)),
        targets,
        weights,
        options,
        adam,
        rng,
    )
}

/// Like [`fit_weighted_lsq`] but batch inputs are produced on demand from row
/// indices, so callers can build features that depend on train-mode passes
/// through other networks.
#[allow(clippy::too_many_arguments)]
pub fn fit_weighted_lsq_with<F>(
    learner: &mut WeakLearner,
    rows: usize,
    mut batch_inputs: F,
    targets: &[f64],
    weights: &[f64],
    options: LsqOptions,
    adam: &mut AdamState,
    rng: &mut RngState,
) -> Result<LsqOutcome>
where
    F: FnMut(&[usize]) -> Result<Matrix>,
{
    if targets.len() != rows || weights.len() != rows {
        return Err(Error::Shape(format!(
            "{rows} rows, {} targets, {} weights",
            targets.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Input(format!("sample weights must be finite and >= 0, found {w}")));
    }
    if weights.iter().all(|&w| w == 0.0) {
        log::warn!("all sample weights are zero; skipping weak learner fit");
        return Ok(LsqOutcome::ZeroWeights);
    }

    let mut loss = f64::NAN;
    let mut steps = 0;
    for _ in 0..options.epochs {
        let order = rng.permutation(rows);
        let mut epoch_loss = 0.0;
        for batch in minibatches(&order, options.batch_size) {
            let x = batch_inputs(batch)?;
            let (fwd, cache) = learner.forward_train(&x)?;
            let b = batch.len() as f64;
            let mut upstream = Vec::with_capacity(batch.len());
            for (&i, &pred) in batch.iter().zip(&fwd.scores) {
                let residual = targets[i] - pred;
                epoch_loss += weights[i] * residual * residual;
                upstream.push(-2.0 * weights[i] * residual / b);
            }
            let (grads, _) = learner.backward(&cache, &upstream, None)?;
            adam.step(&mut learner.params_mut(), &grads.slices())?;
            steps += 1;
        }
        loss = epoch_loss / rows as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric("weak learner regression loss diverged".into()));
        }
    }
    Ok(LsqOutcome::Trained { loss, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, AdamConfig, LearnerArch};

    fn linear_arch(input: usize) -> LearnerArch {
        LearnerArch::new(input, vec![1])
            .with_batch_norm(false)
            .with_penultimate_activation(Activation::Identity)
    }

    #[test]
    fn single_sample_converges_to_target() {
        let mut rng = RngState::new(21);
        let mut learner = WeakLearner::new(linear_arch(2), &mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -1.0]]).unwrap();
        let mut adam = AdamState::new(AdamConfig::new(0.01, 0.0));
        let opts = LsqOptions { epochs: 3000, batch_size: 8 };
        fit_weighted_lsq(&mut learner, &x, &[1.7], &[1.0], opts, &mut adam, &mut rng).unwrap();
        let pred = learner.forward_eval(&x).unwrap().scores[0];
        assert!((pred - 1.7).abs() < 1e-2, "prediction {pred}");
    }

    #[test]
    fn unit_weights_match_plain_mse() {
        let x = Matrix::from_vec(6, 2, (0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let y: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let opts = LsqOptions { epochs: 4, batch_size: 3 };
        let run = |w: &[f64]| {
            let mut rng = RngState::new(3);
            let mut learner = WeakLearner::new(LearnerArch::new(2, vec![4]), &mut rng).unwrap();
            let mut adam = AdamState::new(AdamConfig::default());
            let out = fit_weighted_lsq(&mut learner, &x, &y, w, opts, &mut adam, &mut rng).unwrap();
            (learner, out)
        };
        let (a, out) = run(&[1.0; 6]);
        let LsqOutcome::Trained { loss, steps } = out else { panic!("not trained") };
        assert_eq!(steps, 8);
        let mse = a
            .forward_eval(&x)
            .map(|f| f.scores.iter().zip(&y).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / 6.0)
            .unwrap();
        assert!(loss.is_finite() && mse.is_finite());
    }

    #[test]
    fn zero_weights_are_a_no_op() {
        let mut rng = RngState::new(1);
        let mut learner = WeakLearner::new(LearnerArch::new(2, vec![3]), &mut rng).unwrap();
        let before = learner.clone();
        let x = Matrix::zeros(4, 2);
        let mut adam = AdamState::new(AdamConfig::default());
        let opts = LsqOptions { epochs: 2, batch_size: 2 };
        let out = fit_weighted_lsq(&mut learner, &x, &[1.0; 4], &[0.0; 4], opts, &mut adam, &mut rng).unwrap();
        assert_eq!(out, LsqOutcome::ZeroWeights);
        assert_eq!(learner, before);
    }

    #[test]
    fn zero_weight_sample_contributes_no_gradient() {
        // Full-batch step on {a, b} with b weighted 0 equals the step on {a} with b's target changed.
        let x = Matrix::from_rows(&[vec![0.2, 0.4], vec![-0.3, 0.9]]).unwrap();
        let arch = LearnerArch::new(2, vec![3]).with_batch_norm(false);
        let opts = LsqOptions { epochs: 1, batch_size: 2 };
        let run = |target_b: f64| {
            let mut rng = RngState::new(17);
            let mut learner = WeakLearner::new(arch.clone(), &mut rng).unwrap();
            let mut adam = AdamState::new(AdamConfig::default());
            fit_weighted_lsq(&mut learner, &x, &[0.5, target_b], &[1.0, 0.0], opts, &mut adam, &mut rng).unwrap();
            learner.params()
        };
        assert_eq!(run(-3.0), run(100.0));
    }

    #[test]
    fn negative_weights_rejected() {
        let mut rng = RngState::new(1);
        let mut learner = WeakLearner::new(LearnerArch::new(1, vec![2]), &mut rng).unwrap();
        let mut adam = AdamState::new(AdamConfig::default());
        let opts = LsqOptions { epochs: 1, batch_size: 2 };
        let x = Matrix::zeros(2, 1);
        assert!(fit_weighted_lsq(&mut learner, &x, &[0.0, 0.0], &[1.0, -1.0], opts, &mut adam, &mut rng).is_err());
    }
}
