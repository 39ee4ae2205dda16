//! The k-NN classifier: discrete loss, utility, majority-vote prediction.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborOrder;
use crate::metric::DistanceMetric;

/// Loss support `{0, 1/k, ..., 1}` of a k-NN classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSpec {
    k: usize,
}

impl LossSpec {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        Ok(LossSpec { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bins(&self) -> usize {
        self.k + 1
    }

    pub fn support(&self) -> Vec<f64> {
        (0..=self.k).map(|m| m as f64 / self.k as f64).collect()
    }

    /// Bin index of a loss value; values off the grid are rejected.
    pub fn bin_of(&self, loss: f64) -> Result<usize> {
        let scaled = loss * self.k as f64;
        let m = scaled.round();
        if !(0.0..=self.k as f64).contains(&m) || (scaled - m).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "loss {loss} is not in the support of a {}-NN",
                self.k
            )));
        }
        Ok(m as usize)
    }
}

/// Number of mismatching labels among the first `k` ranked neighbors.
pub fn knn_mismatches(order: &NeighborOrder, labels: &[u32], y: u32, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if order.len() < k {
        return Err(Error::InsufficientNeighbors {
            needed: k,
            available: order.len(),
        });
    }
    Ok(order.ranked[..k].iter().filter(|&&j| labels[j] != y).count())
}

/// Fraction of the `k` nearest neighbors whose label differs from `y`.
pub fn knn_loss(order: &NeighborOrder, labels: &[u32], y: u32, k: usize) -> Result<f64> {
    Ok(knn_mismatches(order, labels, y, k)? as f64 / k as f64)
}

pub fn knn_utility(order: &NeighborOrder, labels: &[u32], y: u32, k: usize) -> Result<f64> {
    Ok(1.0 - knn_loss(order, labels, y, k)?)
}

/// Majority vote over the `k` nearest (ties toward the smaller label) and
/// the confidence assigned to `y_query`, i.e. `1 - loss`.
pub fn knn_predict_confidence(
    order: &NeighborOrder,
    labels: &[u32],
    y_query: u32,
    k: usize,
) -> Result<(u32, f64)> {
    let loss = knn_loss(order, labels, y_query, k)?;
    Ok((majority_vote(order.ranked[..k].iter().map(|&j| labels[j])), 1.0 - loss))
}

pub(crate) fn majority_vote(labels: impl Iterator<Item = u32>) -> u32 {
    let mut counts: Vec<usize> = Vec::new();
    for l in labels {
        let l = l as usize;
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    let mut best = 0;
    for (label, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = label;
        }
    }
    best as u32
}

/// Loss at `query` of a k-NN trained only on `subset`, using the canonical
/// tie-broken order restricted to the subset.
pub fn subset_loss(
    dataset: &Dataset,
    metric: DistanceMetric,
    subset: &[usize],
    query: &[f64],
    y: u32,
    k: usize,
) -> Result<f64> {
    if subset.len() < k {
        return Err(Error::UndefinedLoss {
            size: subset.len(),
            k,
        });
    }
    let mut cands = subset
        .iter()
        .map(|&i| metric.distance(query, dataset.point(i)).map(|d| (d, i)))
        .collect::<Result<Vec<_>>>()?;
    cands.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mismatches = cands[..k]
        .iter()
        .filter(|(_, i)| dataset.label(*i) != y)
        .count();
    Ok(mismatches as f64 / k as f64)
}

/// Same as [`subset_loss`] but over a precomputed full ordering: keeps the
/// first `k` ranked entries whose membership flag is set.
pub fn subset_loss_in_order(
    order: &NeighborOrder,
    labels: &[u32],
    member: impl Fn(usize) -> bool,
    y: u32,
    k: usize,
) -> Option<usize> {
    let mut taken = 0;
    let mut mismatches = 0;
    for &j in &order.ranked {
        if member(j) {
            taken += 1;
            if labels[j] != y {
                mismatches += 1;
            }
            if taken == k {
                return Some(mismatches);
            }
        }
    }
    None
}
