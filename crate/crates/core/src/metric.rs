use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used to rank training points around a query.
///
/// Cosine distance is evaluated as `0.5 * |a/|a| - b/|b||^2`, which equals
/// `1 - cos(a, b)` and lets the same tree search serve both metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::Argument(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
        })
    }
}

impl DistanceMetric {
    /// Maps a raw vector into the space the tree searches in.
    pub(crate) fn embed(&self, v: &[f64]) -> Option<Vec<f64>> {
        match self {
            DistanceMetric::Euclidean => Some(v.to_vec()),
            DistanceMetric::Cosine => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    None
                } else {
                    Some(v.iter().map(|x| x / norm).collect())
                }
            }
        }
    }

    /// Converts a squared euclidean distance between embedded vectors into
    /// the reported distance. Monotone non-decreasing.
    #[inline]
    pub(crate) fn distance_from_squared(&self, sq: f64) -> f64 {
        match self {
            DistanceMetric::Euclidean => sq.sqrt(),
            DistanceMetric::Cosine => 0.5 * sq,
        }
    }

    /// Distance between two raw vectors. Cosine with a zero vector is an
    /// argument error.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                found: b.len(),
            });
        }
        let zero = || Error::Argument("cosine distance is undefined for a zero vector".into());
        let ea = self.embed(a).ok_or_else(zero)?;
        let eb = self.embed(b).ok_or_else(zero)?;
        Ok(self.distance_from_squared(squared_euclidean(&ea, &eb)))
    }
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
