//! Attribution scores for k-NN training points: WaKA and its removal,
//! addition and membership variants, exact Shapley values, and
//! leave-one-out, in self- or test-aggregated mode.

mod contributions;
mod shapley;
mod store;
mod wasserstein;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use contributions::{
    marginal_contributions, BinomialTable, ContributionCounter, ContributionHistogram,
};
pub use shapley::{loo, loo_all, shapley_knn};
pub use store::{build_contribution_store, waka_influence, ContributionStore, PointContributions};
pub use wasserstein::{
    t_waka, utility_cdf_difference, waka, waka_add, waka_from_bins, waka_rem, WakaParams,
    DEFAULT_TAU,
};
pub(crate) use wasserstein::t_waka_at_bin;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::metric::DistanceMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Waka,
    WakaRem,
    WakaAdd,
    Shapley,
    Loo,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Waka,
        Method::WakaRem,
        Method::WakaAdd,
        Method::Shapley,
        Method::Loo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Waka => "waka",
            Method::WakaRem => "waka-rem",
            Method::WakaAdd => "waka-add",
            Method::Shapley => "shapley",
            Method::Loo => "loo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "waka" => Ok(Method::Waka),
            "waka-rem" => Ok(Method::WakaRem),
            "waka-add" => Ok(Method::WakaAdd),
            "shapley" | "dsv" => Ok(Method::Shapley),
            "loo" => Ok(Method::Loo),
            other => Err(Error::Argument(format!("unknown attribution method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[serde(rename = "self")]
    SelfAttribution,
    TestAggregated,
}

/// Everything that determines an attribution run besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub k: usize,
    pub metric: DistanceMetric,
    pub horizon: usize,
    pub tau: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub seed: u64,
}

impl AttributionConfig {
    pub fn new(k: usize) -> Self {
        AttributionConfig {
            k,
            metric: DistanceMetric::Euclidean,
            horizon: crate::index::DEFAULT_HORIZON,
            tau: DEFAULT_TAU,
            l_min: 0.0,
            l_max: 1.0,
            seed: 0,
        }
    }

    pub fn waka_params(&self) -> WakaParams {
        WakaParams {
            k: self.k,
            l_min: self.l_min,
            l_max: self.l_max,
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub method: Method,
    pub mode: Mode,
    pub scores: Vec<f64>,
    pub config: AttributionConfig,
}

impl AttributionReport {
    /// Writes `point_id,score` rows to `csv_path` and the method, mode and
    /// configuration to `json_path`.
    pub fn write(&self, dataset: &Dataset, csv_path: &Path, json_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["point_id", "score"])?;
        for (i, s) in self.scores.iter().enumerate() {
            w.write_record([dataset.point_id(i), format!("{s:?}")])?;
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;

        #[derive(Serialize)]
        struct Sidecar<'a> {
            method: Method,
            mode: Mode,
            n: usize,
            config: &'a AttributionConfig,
        }
        let file = File::create(json_path).map_err(|e| Error::io(json_path, e))?;
        serde_json::to_writer_pretty(
            BufWriter::new(file),
            &Sidecar {
                method: self.method,
                mode: self.mode,
                n: self.scores.len(),
                config: &self.config,
            },
        )?;
        Ok(())
    }
}

/// Scores one training point's attribution to its own label prediction.
pub fn self_attribution(
    dataset: &Dataset,
    index: &NeighborIndex,
    i: usize,
    method: Method,
    config: &AttributionConfig,
) -> Result<f64> {
    let k = config.k;
    let y = dataset.label(i);
    match method {
        Method::Waka | Method::WakaRem | Method::WakaAdd => {
            let order = index.query_self(dataset, i, config.horizon.max(k + 1))?;
            let hist = marginal_contributions(&order, dataset.labels(), 0, y, k, config.horizon)?;
            let params = config.waka_params();
            Ok(match method {
                Method::Waka => waka(&hist, &params),
                Method::WakaRem => waka_rem(&hist, &params, true),
                _ => waka_add(&hist, &params, true),
            })
        }
        Method::Shapley => {
            let order = index.query_self(dataset, i, dataset.len())?;
            Ok(shapley_knn(&order, dataset.labels(), y, k)?[i])
        }
        Method::Loo => {
            let order = index.query_self(dataset, i, k + 1)?;
            loo(&order, dataset.labels(), i, y, k)
        }
    }
}

/// Self-attribution for every training point.
pub fn self_attribution_all(
    dataset: &Dataset,
    index: &NeighborIndex,
    method: Method,
    config: &AttributionConfig,
) -> Result<AttributionReport> {
    config.waka_params().validate()?;
    let scores = (0..dataset.len())
        .into_par_iter()
        .map(|i| self_attribution(dataset, index, i, method, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionReport {
        method,
        mode: Mode::SelfAttribution,
        scores,
        config: *config,
    })
}

/// Scores of every training point with respect to one query point.
///
/// WaKA variants only assign non-zero scores within the horizon.
pub fn query_scores(
    train: &Dataset,
    index: &NeighborIndex,
    query: &[f64],
    y_t: u32,
    method: Method,
    config: &AttributionConfig,
) -> Result<Vec<f64>> {
    let k = config.k;
    let labels = train.labels();
    match method {
        Method::Shapley => {
            let order = index.query_sorted(query, train.len())?;
            shapley_knn(&order, labels, y_t, k)
        }
        Method::Loo => {
            let order = index.query_sorted(query, k + 1)?;
            loo_all(&order, labels, y_t, k, train.len())
        }
        Method::Waka | Method::WakaRem | Method::WakaAdd => {
            let order = index.query_sorted(query, config.horizon.max(k + 1))?;
            let counter = ContributionCounter::new(k, order.len().max(k + 1))?;
            let params = config.waka_params();
            let mut scores = vec![0.0; train.len()];
            for rank in 0..order.len() {
                let idx = order.ranked[rank];
                let hist = counter.histogram(&order, labels, rank, y_t)?;
                let label_match = labels[idx] == y_t;
                scores[idx] = match method {
                    Method::Waka => waka(&hist, &params),
                    Method::WakaRem => waka_rem(&hist, &params, label_match),
                    _ => waka_add(&hist, &params, label_match),
                };
            }
            Ok(scores)
        }
    }
}

/// Column means of a `[test × train]` score matrix.
pub fn aggregate_test(per_test_scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = per_test_scores
        .first()
        .ok_or_else(|| Error::Argument("test set is empty".into()))?;
    let n = first.len();
    let mut sums = vec![0.0; n];
    for row in per_test_scores {
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: row.len(),
            });
        }
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let m = per_test_scores.len() as f64;
    Ok(sums.into_iter().map(|s| s / m).collect())
}

/// Test-aggregated attribution: mean per-training-point score over `test`.
pub fn test_attribution(
    train: &Dataset,
    index: &NeighborIndex,
    test: &Dataset,
    method: Method,
    config: &AttributionConfig,
) -> Result<AttributionReport> {
    config.waka_params().validate()?;
    if test.dim() != train.dim() {
        return Err(Error::Dimension {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let rows = (0..test.len())
        .into_par_iter()
        .map(|t| query_scores(train, index, test.point(t), test.label(t), method, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionReport {
        method,
        mode: Mode::TestAggregated,
        scores: aggregate_test(&rows)?,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aggregate_cases() {
        assert_eq!(aggregate_test(&[vec![1.0, -2.0]]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(aggregate_test(&[vec![0.3, 1.0], vec![-0.3, 3.0]]).unwrap(), vec![0.0, 2.0]);
        assert!(aggregate_test(&[]).is_err());
        assert!(aggregate_test(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn aggregate_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let got = aggregate_test(&m).unwrap();
        for j in 0..20 {
            let mut s = 0.0;
            for row in &m {
                s += row[j];
            }
            assert!((got[j] - s / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn self_shapley_homogeneous() {
        let rows = (0..7).map(|i| vec![i as f64 * 0.37, (i * i) as f64 * 0.1]).collect();
        let ds = Dataset::from_rows(rows, vec![4; 7]).unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let cfg = AttributionConfig::new(3);
        for i in 0..7 {
            let v = self_attribution(&ds, &index, i, Method::Shapley, &cfg).unwrap();
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
            assert_eq!(self_attribution(&ds, &index, i, Method::Waka, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }
}
