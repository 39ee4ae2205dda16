//! Classification metrics for k-NN predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Number of true instances per class id.
    pub support: Vec<usize>,
    /// Number of predictions per class id.
    pub predicted: Vec<usize>,
}

/// Accuracy and macro-F1. The macro average runs over every class that
/// occurs in the truth or in the predictions; a class that is never
/// predicted correctly scores F1 = 0.
pub fn metrics(predictions: &[u32], truth: &[u32]) -> Result<Metrics> {
    if predictions.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            found: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Argument("metrics need at least one prediction".into()));
    }
    let classes = predictions
        .iter()
        .chain(truth)
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1);
    let mut support = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut hits = vec![0usize; classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        support[t as usize] += 1;
        predicted[p as usize] += 1;
        if p == t {
            hits[t as usize] += 1;
        }
    }
    let mut f1_sum = 0.0;
    let mut present = 0;
    for c in 0..classes {
        if support[c] == 0 && predicted[c] == 0 {
            continue;
        }
        present += 1;
        // F1 = 2 TP / (2 TP + FP + FN) = 2 TP / (support + predicted)
        f1_sum += 2.0 * hits[c] as f64 / (support[c] + predicted[c]) as f64;
    }
    let correct: usize = hits.iter().sum();
    Ok(Metrics {
        accuracy: correct as f64 / truth.len() as f64,
        macro_f1: f1_sum / present as f64,
        support,
        predicted,
    })
}
