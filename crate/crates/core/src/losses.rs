//! Task losses with closed-form first/second-order statistics.
//!
//! Each boosting stage regresses the next weak learner onto the Newton target
//! `ỹ = −g/h` with sample weights `h`, where `g` and `h` are the first and
//! second derivatives of the task loss with respect to the current ensemble
//! score. The corrective step optimizes the task loss itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::QueryGroups;
use crate::rng::RngState;

/// Curvature floor used when forming `ỹ = −g/h`.
pub const DEFAULT_H_MIN: f64 = 1e-6;
pub const DEFAULT_SIGMA0: f64 = 1.0;
pub const DEFAULT_MAX_PAIRS_PER_QUERY: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    BinaryClassification,
    PairwiseRanking { sigma0: f64 },
}

impl TaskKind {
    pub fn ranking() -> Self {
        TaskKind::PairwiseRanking {
            sigma0: DEFAULT_SIGMA0,
        }
    }

    pub fn is_ranking(&self) -> bool {
        matches!(self, TaskKind::PairwiseRanking { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let TaskKind::PairwiseRanking { sigma0 } = self {
            if !(*sigma0 > 0.0 && sigma0.is_finite()) {
                return Err(Error::Config(format!("sigma0 must be positive, got {sigma0}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Regression => "regression",
            TaskKind::BinaryClassification => "classification",
            TaskKind::PairwiseRanking { .. } => "ranking",
        }
    }
}

/// Per-sample first/second-order statistics and Newton targets for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHessBatch {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub y_tilde: Vec<f64>,
}

impl GradHessBatch {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// First-order variant: unit curvature, so targets are the raw negative gradient.
    pub fn first_order(mut self) -> Self {
        self.h.iter_mut().for_each(|h| *h = 1.0);
        self.y_tilde = self.g.iter().map(|g| -g).collect();
        self
    }
}

/// Preferred/non-preferred document pairs, grouped by query.
///
/// Every stored pair `(i, j)` means document `i` has a strictly higher grade
/// than document `j` (`S_ij = +1`). Indices are row positions in the dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairSet {
    queries: Vec<Vec<(usize, usize)>>,
}

impl PairSet {
    pub fn from_queries(queries: Vec<Vec<(usize, usize)>>) -> Self {
        Self { queries }
    }

    pub fn queries(&self) -> &[Vec<(usize, usize)>] {
        &self.queries
    }

    pub fn query(&self, q: usize) -> &[(usize, usize)] {
        &self.queries[q]
    }

    pub fn num_pairs(&self) -> usize {
        self.queries.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.queries.iter().flatten().copied()
    }

    /// Pairs of the chosen queries, re-indexed to a batch that lays those
    /// queries out back to back in the given order.
    pub fn subset(&self, query_ids: &[usize], groups: &QueryGroups) -> PairSet {
        let mut offset = 0;
        let mut queries = Vec::with_capacity(query_ids.len());
        for &q in query_ids {
            let range = groups.range(q);
            let start = range.start;
            queries.push(
                self.queries[q]
                    .iter()
                    .map(|&(i, j)| (i - start + offset, j - start + offset))
                    .collect(),
            );
            offset += range.len();
        }
        PairSet { queries }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} targets but {b} predictions")));
    }
    Ok(())
}

/// Squared error: `g = 2(ŷ − y)`, `h = 2`, `ỹ = y − ŷ`.
pub fn regression_stats(y: &[f64], y_hat: &[f64]) -> Result<GradHessBatch> {
    check_lengths(y.len(), y_hat.len())?;
    let g = y.iter().zip(y_hat).map(|(t, p)| 2.0 * (p - t)).collect();
    let h = vec![2.0; y.len()];
    let y_tilde = y.iter().zip(y_hat).map(|(t, p)| t - p).collect();
    Ok(GradHessBatch { g, h, y_tilde })
}

fn check_label(y: f64) -> Result<()> {
    if y != 1.0 && y != -1.0 {
        return Err(Error::Input(format!("classification labels must be -1 or +1, got {y}")));
    }
    Ok(())
}

/// Binary cross-entropy `log(1 + e^{−2yŷ})` with `y ∈ {−1, +1}`.
pub fn classification_loss(y: f64, y_hat: f64) -> f64 {
    softplus(-2.0 * y * y_hat)
}

pub fn classification_stats(y: &[f64], y_hat: &[f64], h_min: f64) -> Result<GradHessBatch> {
    check_lengths(y.len(), y_hat.len())?;
    let mut out = GradHessBatch {
        g: Vec::with_capacity(y.len()),
        h: Vec::with_capacity(y.len()),
        y_tilde: Vec::with_capacity(y.len()),
    };
    for (&t, &p) in y.iter().zip(y_hat) {
        check_label(t)?;
        let margin = 2.0 * t * p;
        let s_pos = sigmoid(margin);
        let s_neg = sigmoid(-margin);
        let g = -2.0 * t * s_neg;
        let h = 4.0 * s_pos * s_neg;
        let y_tilde = if h >= h_min {
            t * (1.0 + (-margin).exp()) / 2.0
        } else {
            -g / h_min
        };
        out.g.push(g);
        out.h.push(h);
        out.y_tilde.push(y_tilde);
    }
    Ok(out)
}

/// Enumerate unequal-grade pairs per query, preferred document first.
///
/// Queries with more than `max_pairs_per_query` such pairs are uniformly
/// subsampled without replacement.
pub fn build_pairs(
    grades: &[f64],
    groups: &QueryGroups,
    max_pairs_per_query: usize,
    rng: &mut RngState,
) -> Result<PairSet> {
    if groups.num_rows() != grades.len() {
        return Err(Error::Shape(format!(
            "query groups cover {} rows but {} grades were given",
            groups.num_rows(),
            grades.len()
        )));
    }
    if let Some(g) = grades.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(Error::Input(format!("relevance grades must be finite and >= 0, got {g}")));
    }
    let mut queries = Vec::with_capacity(groups.num_queries());
    for range in groups.ranges() {
        let mut pairs = Vec::new();
        for i in range.clone() {
            for j in (i + 1)..range.end {
                if grades[i] > grades[j] {
                    pairs.push((i, j));
                } else if grades[j] > grades[i] {
                    pairs.push((j, i));
                }
            }
        }
        if pairs.len() > max_pairs_per_query {
            pairs = rng
                .sample_indices(pairs.len(), max_pairs_per_query)
                .into_iter()
                .map(|k| pairs[k])
                .collect();
        }
        queries.push(pairs);
    }
    Ok(PairSet { queries })
}

/// `½(1 − S)σ₀(ŷᵢ − ŷⱼ) + log(1 + e^{−σ₀(ŷᵢ − ŷⱼ)})`.
pub fn pairwise_loss(yi_hat: f64, yj_hat: f64, s_ij: i8, sigma0: f64) -> f64 {
    let margin = sigma0 * (yi_hat - yj_hat);
    0.5 * (1.0 - f64::from(s_ij)) * margin + softplus(-margin)
}

/// `∂l/∂ŷᵢ` and `∂²l/∂ŷᵢ²` of the pairwise loss for a pair with `S = +1`.
fn pair_derivatives(yi_hat: f64, yj_hat: f64, sigma0: f64) -> (f64, f64) {
    let rho = sigmoid(-sigma0 * (yi_hat - yj_hat));
    (-sigma0 * rho, sigma0 * sigma0 * rho * (1.0 - rho))
}

/// Per-document statistics summed over every pair the document belongs to.
///
/// Curvature contributions of both pair members are added; documents that
/// appear in no pair get `g = h = ỹ = 0`.
pub fn ranking_stats(scores: &[f64], pairs: &PairSet, sigma0: f64, h_min: f64) -> Result<GradHessBatch> {
    let n = scores.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for (i, j) in pairs.iter() {
        if i >= n || j >= n {
            return Err(Error::Shape(format!("pair ({i}, {j}) outside {n} scores")));
        }
        let (d1, d2) = pair_derivatives(scores[i], scores[j], sigma0);
        g[i] += d1;
        g[j] -= d1;
        h[i] += d2;
        h[j] += d2;
    }
    let y_tilde = g.iter().zip(&h).map(|(g, h)| -g / h.max(h_min)).collect();
    Ok(GradHessBatch { g, h, y_tilde })
}

/// Task loss used by the corrective step, with its gradient w.r.t. `ŷ`.
///
/// Regression and classification average over samples; ranking averages the
/// pairwise loss over all pairs.
pub fn corrective_loss_grad(
    task: TaskKind,
    targets: &[f64],
    pairs: Option<&PairSet>,
    y_hat: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if y_hat.is_empty() {
        return Err(Error::Input("corrective loss of an empty batch".into()));
    }
    match task {
        TaskKind::Regression => {
            check_lengths(targets.len(), y_hat.len())?;
            let n = y_hat.len() as f64;
            let loss = targets.iter().zip(y_hat).map(|(t, p)| (p - t).powi(2)).sum::<f64>() / n;
            let grad = targets.iter().zip(y_hat).map(|(t, p)| 2.0 * (p - t) / n).collect();
            Ok((loss, grad))
        }
        TaskKind::BinaryClassification => {
            check_lengths(targets.len(), y_hat.len())?;
            let n = y_hat.len() as f64;
            let mut loss = 0.0;
            let mut grad = Vec::with_capacity(y_hat.len());
            for (&t, &p) in targets.iter().zip(y_hat) {
                check_label(t)?;
                loss += classification_loss(t, p);
                grad.push(-2.0 * t * sigmoid(-2.0 * t * p) / n);
            }
            Ok((loss / n, grad))
        }
        TaskKind::PairwiseRanking { sigma0 } => {
            let pairs = pairs.ok_or_else(|| Error::Input("ranking loss needs document pairs".into()))?;
            let count = pairs.num_pairs();
            if count == 0 {
                return Err(Error::Input("ranking loss over zero pairs".into()));
            }
            let p = count as f64;
            let mut loss = 0.0;
            let mut grad = vec![0.0; y_hat.len()];
            for (i, j) in pairs.iter() {
                if i >= y_hat.len() || j >= y_hat.len() {
                    return Err(Error::Shape(format!("pair ({i}, {j}) outside {} scores", y_hat.len())));
                }
                loss += pairwise_loss(y_hat[i], y_hat[j], 1, sigma0);
                let (d1, _) = pair_derivatives(y_hat[i], y_hat[j], sigma0);
                grad[i] += d1 / p;
                grad[j] -= d1 / p;
            }
            Ok((loss / p, grad))
        }
    }
}

pub fn corrective_loss(task: TaskKind, targets: &[f64], pairs: Option<&PairSet>, y_hat: &[f64]) -> Result<f64> {
    corrective_loss_grad(task, targets, pairs, y_hat).map(|(l, _)| l)
}

/// Constant starting score `f₀`.
///
/// Classification uses `log(n₊/n₋)`, regression the target mean, ranking 0.
pub fn prior(task: TaskKind, targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Input("cannot compute a prior from zero targets".into()));
    }
    match task {
        TaskKind::Regression => Ok(targets.iter().sum::<f64>() / targets.len() as f64),
        TaskKind::BinaryClassification => {
            let mut pos = 0usize;
            let mut neg = 0usize;
            for &t in targets {
                check_label(t)?;
                if t > 0.0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
            if pos == 0 || neg == 0 {
                return Err(Error::Input(
                    "classification prior needs both positive and negative examples".into(),
                ));
            }
            Ok((pos as f64 / neg as f64).ln())
        }
        TaskKind::PairwiseRanking { .. } => Ok(0.0),
    }
}
