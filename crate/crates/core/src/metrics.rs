//! Evaluation metrics: RMSE, AUC-ROC and NDCG@k.

use std::cmp::Ordering;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TaskKind;

/// Partition of a document list into contiguous queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGroups {
    /// `offsets[q]..offsets[q + 1]` are the rows of query `q`.
    offsets: Vec<usize>,
    /// External query identifiers, one per query.
    ids: Vec<u64>,
}

impl QueryGroups {
    pub fn from_offsets(offsets: Vec<usize>, ids: Option<Vec<u64>>) -> Result<Self> {
        if offsets.first() != Some(&0) {
            return Err(Error::Input("query offsets must start at 0".into()));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("query offsets must be strictly increasing".into()));
        }
        let count = offsets.len() - 1;
        let ids = ids.unwrap_or_else(|| (0..count as u64).collect());
        if ids.len() != count {
            return Err(Error::Input(format!("{} query ids for {count} queries", ids.len())));
        }
        Ok(Self { offsets, ids })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self::from_offsets(offsets, None)
    }

    pub fn num_queries(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of rows covered.
    pub fn num_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn range(&self, q: usize) -> Range<usize> {
        self.offsets[q]..self.offsets[q + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions, {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::Input("rmse of an empty set".into()));
    }
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
///
/// Tied scores receive their average rank, which counts each tied
/// positive/negative pair as one half.
pub fn auc_roc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let mut positives = 0u64;
    for &y in labels {
        match y {
            1.0 => positives += 1,
            -1.0 => {}
            other => return Err(Error::Input(format!("auc labels must be -1 or +1, got {other}"))),
        }
    }
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Input("auc needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the rank sum of the positives, kept integral
    let mut rank_sum2 = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i] > 0.0).count() as u64;
        // average 1-based rank of the block is (start + 1 + end) / 2
        rank_sum2 += tied_pos * (start as u64 + 1 + end as u64);
        start = end;
    }
    let u2 = rank_sum2 - positives * (positives + 1);
    Ok(u2 as f64 / (2 * positives * negatives) as f64)
}

fn gain(grade: f64) -> f64 {
    grade.exp2() - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 2) as f64).log2()
}

/// DCG@k of `grades` listed in ranked order.
pub fn dcg_at_k(ranked_grades: impl IntoIterator<Item = f64>, k: usize) -> f64 {
    ranked_grades
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, g)| gain(g) / discount(r))
        .sum()
}

/// Indices of one query ordered by descending score, ties by position.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order
}

/// NDCG@k for a single query. A query whose ideal DCG is zero scores 1.
pub fn query_ndcg(scores: &[f64], grades: &[f64], k: usize) -> f64 {
    let mut ideal: Vec<f64> = grades.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let ideal_dcg = dcg_at_k(ideal, k);
    if ideal_dcg == 0.0 {
        return 1.0;
    }
    let dcg = dcg_at_k(rank_by_score(scores).into_iter().map(|i| grades[i]), k);
    dcg / ideal_dcg
}

/// Mean NDCG@k over queries with exponential gain `2^grade − 1` and
/// `log₂(rank + 1)` discount.
pub fn ndcg_at_k(scores: &[f64], grades: &[f64], groups: &QueryGroups, k: usize) -> Result<f64> {
    if scores.len() != grades.len() || groups.num_rows() != scores.len() {
        return Err(Error::Shape(format!(
            "{} scores, {} grades, groups over {} rows",
            scores.len(),
            grades.len(),
            groups.num_rows()
        )));
    }
    if k == 0 {
        return Err(Error::Input("ndcg cutoff k must be at least 1".into()));
    }
    if groups.num_queries() == 0 {
        return Err(Error::Input("ndcg over zero queries".into()));
    }
    if grades.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::Input("relevance grades must be >= 0".into()));
    }
    let total: f64 = groups
        .ranges()
        .map(|r| query_ndcg(&scores[r.clone()], &grades[r], k))
        .sum();
    Ok(total / groups.num_queries() as f64)
}

/// Model-selection / reporting metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Auc,
    Ndcg { k: usize },
}

impl Metric {
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Metric::Rmse)
    }

    /// Whether the metric is defined for models of `task`.
    pub fn fits(&self, task: TaskKind) -> bool {
        matches!(
            (self, task),
            (Metric::Auc, TaskKind::BinaryClassification)
                | (Metric::Rmse, TaskKind::Regression)
                | (Metric::Ndcg { .. }, TaskKind::PairwiseRanking { .. })
        )
    }

    /// `true` when `candidate` is strictly better than `incumbent`.
    pub fn improves(&self, candidate: f64, incumbent: f64) -> bool {
        if self.higher_is_better() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }

    pub fn evaluate(&self, scores: &[f64], targets: &[f64], groups: Option<&QueryGroups>) -> Result<f64> {
        match self {
            Metric::Rmse => rmse(scores, targets),
            Metric::Auc => auc_roc(scores, targets),
            Metric::Ndcg { k } => {
                let groups = groups.ok_or_else(|| Error::Input("ndcg needs query groups".into()))?;
                ndcg_at_k(scores, targets, groups, *k)
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "rmse" => Ok(Metric::Rmse),
            "auc" => Ok(Metric::Auc),
            "ndcg" => Ok(Metric::Ndcg { k: 5 }),
            _ => {
                if let Some(k) = lower.strip_prefix("ndcg@") {
                    let k = k
                        .parse()
                        .map_err(|_| Error::Config(format!("bad ndcg cutoff in {name:?}")))?;
                    return Ok(Metric::Ndcg { k });
                }
                Err(Error::Config(format!("unknown metric {name:?}; expected rmse, auc or ndcg@k")))
            }
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Rmse => write!(f, "rmse"),
            Metric::Auc => write!(f, "auc"),
            Metric::Ndcg { k } => write!(f, "ndcg@{k}"),
        }
    }
}
