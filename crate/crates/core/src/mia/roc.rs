//! ROC summaries for membership scores (higher = more likely member).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPR_LEVELS: [f64; 3] = [0.001, 0.01, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub auc: f64,
    /// TPR keyed by the FPR level, printed as a decimal string.
    pub tpr_at_fpr: BTreeMap<String, f64>,
    pub threshold_accuracy: f64,
}

/// Vertices `(fpr, tpr)` of the step ROC, from `(0, 0)` to `(1, 1)`. Equal
/// scores are grouped into a single step, so ties produce diagonal segments.
pub fn roc_curve(scores: &[f64], membership: &[bool]) -> Result<Vec<(f64, f64)>> {
    if scores.len() != membership.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            found: membership.len(),
        });
    }
    let pos = membership.iter().filter(|&&m| m).count();
    let neg = membership.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument(
            "ROC needs both members and non-members".into(),
        ));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Validation(format!("score {s} is not a number")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            if membership[idx[end]] {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        start = end;
    }
    Ok(points)
}

pub fn roc_metrics(scores: &[f64], membership: &[bool], fpr_levels: &[f64]) -> Result<RocSummary> {
    let curve = roc_curve(scores, membership)?;
    let auc = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    let mut tpr_at_fpr = BTreeMap::new();
    for &level in fpr_levels {
        let tpr = curve
            .iter()
            .filter(|(f, _)| *f <= level)
            .map(|&(_, t)| t)
            .fold(0.0, f64::max);
        tpr_at_fpr.insert(level_key(level), tpr);
    }
    let threshold_accuracy = curve
        .iter()
        .map(|&(f, t)| (t + 1.0 - f) / 2.0)
        .fold(0.0, f64::max);
    Ok(RocSummary {
        auc,
        tpr_at_fpr,
        threshold_accuracy,
    })
}

pub fn level_key(level: f64) -> String {
    format!("{level}")
}

/// Element-wise mean of several summaries (all must share FPR levels).
pub fn mean_summary(summaries: &[RocSummary]) -> Result<RocSummary> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Argument("no ROC summaries to average".into()))?;
    let n = summaries.len() as f64;
    let mut tpr_at_fpr = BTreeMap::new();
    for key in first.tpr_at_fpr.keys() {
        let mut s = 0.0;
        for r in summaries {
            s += r.tpr_at_fpr.get(key).copied().ok_or_else(|| {
                Error::Argument(format!("ROC summary is missing FPR level {key}"))
            })?;
        }
        tpr_at_fpr.insert(key.clone(), s / n);
    }
    Ok(RocSummary {
        auc: summaries.iter().map(|r| r.auc).sum::<f64>() / n,
        tpr_at_fpr,
        threshold_accuracy: summaries.iter().map(|r| r.threshold_accuracy).sum::<f64>() / n,
    })
}
