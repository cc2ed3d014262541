//! Dense neural-network substrate for weak learners.

mod adam;
mod arch;
mod learner;
mod lsq;

pub use adam::{AdamConfig, AdamState};
pub use arch::{Activation, LearnerArch};
pub use learner::{
    BatchNorm, Dense, Forward, ForwardCache, Gradients, HiddenLayer, LayerGradients, WeakLearner,
    BN_EPSILON, BN_MOMENTUM,
};
pub use lsq::{fit_weighted_lsq, fit_weighted_lsq_with, LsqOptions, LsqOutcome};

/// Split `order` into mini-batches of at most `batch_size` rows.
///
/// A trailing batch of a single row is merged into its predecessor so that
/// batch normalization always sees at least two rows when it can.
pub fn minibatches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let size = batch_size.max(1);
    let mut batches: Vec<&[usize]> = order.chunks(size).collect();
    if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() == 1) {
        batches.pop();
        let start = order.len() - size - 1;
        let merged = &order[start..];
        *batches.last_mut().expect("len >= 1") = merged;
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::minibatches;

    #[test]
    fn trailing_singleton_is_merged() {
        let order: Vec<usize> = (0..9).collect();
        let b = minibatches(&order, 4);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], &[0, 1, 2, 3]);
        assert_eq!(b[1], &[4, 5, 6, 7, 8]);
        let b = minibatches(&order, 3);
        assert_eq!(b.iter().map(|x| x.len()).collect::<Vec<_>>(), vec![3, 3, 3]);
        let one = [7usize];
        assert_eq!(minibatches(&one, 4), vec![&[7usize][..]]);
    }
}
