//! Data-minimization curves: retrain the k-NN after removing (or adding)
//! training points in attribution order and track test metrics.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::metrics;
use crate::attribution::{test_attribution, AttributionConfig, Method};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::knn::majority_vote;
use crate::metric::DistanceMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Start from the full set and drop the lowest-ranked points.
    Removal,
    /// Start from nothing and add the highest-ranked points.
    Addition,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Removal => "removal",
            Direction::Addition => "addition",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "removal" | "remove" => Ok(Direction::Removal),
            "addition" | "add" => Ok(Direction::Addition),
            other => Err(Error::Argument(format!("unknown direction `{other}`"))),
        }
    }
}

/// What orders the training points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ranking {
    Attribution(Method),
    Random,
}

impl Ranking {
    pub fn name(&self) -> &'static str {
        match self {
            Ranking::Attribution(m) => m.name(),
            Ranking::Random => "random",
        }
    }
}

impl std::str::FromStr for Ranking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Ranking::Random),
            other => other.parse().map(Ranking::Attribution),
        }
    }
}

/// Training pool, the set used to value it, and the held-out evaluation set.
#[derive(Debug, Clone, Copy)]
pub struct MinimizationSetup<'a> {
    pub train: &'a Dataset,
    pub valuation: &'a Dataset,
    pub test: &'a Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationParams {
    pub k: usize,
    pub metric: DistanceMetric,
    pub horizon: usize,
    pub tau: f64,
    /// Fractions of the training set removed (removal) or kept (addition).
    pub steps: Vec<f64>,
    /// Seeds for the random baseline; attribution rankings are seed-free
    /// but are reported once per seed so curves stay aligned.
    pub seeds: Vec<u64>,
}

impl MinimizationParams {
    pub fn new(k: usize) -> Self {
        MinimizationParams {
            k,
            metric: DistanceMetric::Euclidean,
            horizon: crate::index::DEFAULT_HORIZON,
            tau: crate::attribution::DEFAULT_TAU,
            steps: default_steps(),
            seeds: vec![0],
        }
    }

    pub fn attribution_config(&self) -> AttributionConfig {
        AttributionConfig {
            tau: self.tau,
            metric: self.metric,
            horizon: self.horizon,
            ..AttributionConfig::new(self.k)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Argument("no minimization steps given".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Argument("at least one seed is required".into()));
        }
        if let Some(s) = self.steps.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Argument(format!("step {s} is outside [0, 1]")));
        }
        if self.steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("steps must be strictly increasing".into()));
        }
        self.attribution_config().waka_params().validate()
    }
}

/// `0.1, 0.2, ..., 0.9`.
pub fn default_steps() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationCurve {
    pub direction: Direction,
    pub method: String,
    /// Evaluated steps (those leaving fewer than `k` points are dropped and
    /// listed in `warnings`).
    pub steps: Vec<f64>,
    /// Training-set size at each step.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `[seed][step]`
    pub accuracy: Vec<Vec<f64>>,
    pub macro_f1: Vec<Vec<f64>>,
    pub minority_ratio: Vec<Vec<f64>>,
    /// Minority class of the full training set and its initial ratio.
    pub minority_class: u32,
    pub initial_minority_ratio: f64,
    pub warnings: Vec<String>,
}

impl MinimizationCurve {
    pub fn step_position(&self, step: f64) -> Option<usize> {
        self.steps.iter().position(|s| (s - step).abs() < 1e-9)
    }

    fn seed_mean(table: &[Vec<f64>], pos: usize) -> f64 {
        table.iter().map(|row| row[pos]).sum::<f64>() / table.len() as f64
    }

    /// Means over seeds, one value per step.
    pub fn mean_accuracy(&self) -> Vec<f64> {
        (0..self.steps.len()).map(|p| Self::seed_mean(&self.accuracy, p)).collect()
    }

    pub fn mean_macro_f1(&self) -> Vec<f64> {
        (0..self.steps.len()).map(|p| Self::seed_mean(&self.macro_f1, p)).collect()
    }

    pub fn mean_minority_ratio(&self) -> Vec<f64> {
        (0..self.steps.len())
            .map(|p| Self::seed_mean(&self.minority_ratio, p))
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "method",
        "direction",
        "seed",
        "step",
        "size",
        "accuracy",
        "macro_f1",
        "minority_ratio",
    ];

    pub fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>, prefix: &[String]) -> Result<()> {
        for (s, seed) in self.seeds.iter().enumerate() {
            for (p, step) in self.steps.iter().enumerate() {
                let mut row = prefix.to_vec();
                row.extend([
                    self.method.clone(),
                    self.direction.name().to_string(),
                    seed.to_string(),
                    format!("{step:?}"),
                    self.sizes[p].to_string(),
                    format!("{:?}", self.accuracy[s][p]),
                    format!("{:?}", self.macro_f1[s][p]),
                    format!("{:?}", self.minority_ratio[s][p]),
                ]);
                w.write_record(&row)?;
            }
        }
        Ok(())
    }
}

/// Writes several curves to one CSV table.
pub fn write_curves(curves: &[MinimizationCurve], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MinimizationCurve::CSV_HEADER)?;
    for c in curves {
        c.write_rows(&mut w, &[])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Test-aggregated attribution of every training point, valued on the
/// valuation set.
pub fn valuation_scores(setup: &MinimizationSetup, method: Method, params: &MinimizationParams) -> Result<Vec<f64>> {
    let index = NeighborIndex::build(setup.train, params.metric)?;
    Ok(test_attribution(setup.train, &index, setup.valuation, method, &params.attribution_config())?.scores)
}

pub fn run_minimization(
    setup: &MinimizationSetup,
    ranking: Ranking,
    direction: Direction,
    params: &MinimizationParams,
) -> Result<MinimizationCurve> {
    params.validate()?;
    let scores = match ranking {
        Ranking::Attribution(method) => Some(valuation_scores(setup, method, params)?),
        Ranking::Random => None,
    };
    curve_from_scores(setup, ranking, scores.as_deref(), direction, params)
}

/// Builds a curve from precomputed scores (`None` for the random baseline).
pub fn curve_from_scores(
    setup: &MinimizationSetup,
    ranking: Ranking,
    scores: Option<&[f64]>,
    direction: Direction,
    params: &MinimizationParams,
) -> Result<MinimizationCurve> {
    params.validate()?;
    let train = setup.train;
    if setup.test.dim() != train.dim() {
        return Err(Error::Dimension {
            expected: train.dim(),
            found: setup.test.dim(),
        });
    }
    let n = train.len();
    let counts = train.class_counts();
    let minority_class = (0..counts.len()).min_by_key(|&c| (counts[c], c)).unwrap_or(0) as u32;
    let initial_minority_ratio = counts[minority_class as usize] as f64 / n as f64;

    let mut warnings = Vec::new();
    let mut steps = Vec::new();
    let mut sizes = Vec::new();
    for &step in &params.steps {
        let moved = (step * n as f64).round() as usize;
        let size = match direction {
            Direction::Removal => n - moved,
            Direction::Addition => moved,
        };
        if size < params.k {
            warnings.push(format!(
                "step {step}: {size} training points remain, fewer than k = {}; skipped",
                params.k
            ));
        } else {
            steps.push(step);
            sizes.push(size);
        }
    }

    // Removal drops a prefix of this order; addition keeps a prefix of it.
    let rank_order = |seed: u64| -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        match (scores, direction) {
            (Some(s), Direction::Removal) => {
                order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)))
            }
            (Some(s), Direction::Addition) => {
                order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)))
            }
            (None, _) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
        order
    };

    let evaluate = |order: &[usize]| -> Result<Vec<(f64, f64, f64)>> {
        sizes
            .par_iter()
            .map(|&size| {
                let mut kept = match direction {
                    Direction::Removal => order[n - size..].to_vec(),
                    Direction::Addition => order[..size].to_vec(),
                };
                kept.sort_unstable();
                evaluate_subset(train, &kept, setup.test, params.k, params.metric, minority_class)
            })
            .collect()
    };

    let rows: Vec<Vec<(f64, f64, f64)>> = match scores {
        Some(_) => {
            let row = evaluate(&rank_order(0))?;
            vec![row; params.seeds.len()]
        }
        None => params
            .seeds
            .iter()
            .map(|&seed| evaluate(&rank_order(seed)))
            .collect::<Result<_>>()?,
    };

    Ok(MinimizationCurve {
        direction,
        method: ranking.name().to_string(),
        steps,
        sizes,
        seeds: params.seeds.clone(),
        accuracy: rows.iter().map(|r| r.iter().map(|x| x.0).collect()).collect(),
        macro_f1: rows.iter().map(|r| r.iter().map(|x| x.1).collect()).collect(),
        minority_ratio: rows.iter().map(|r| r.iter().map(|x| x.2).collect()).collect(),
        minority_class,
        initial_minority_ratio,
        warnings,
    })
}

/// `(accuracy, macro_f1, minority_ratio)` of a k-NN trained on `kept`.
fn evaluate_subset(
    train: &Dataset,
    kept: &[usize],
    test: &Dataset,
    k: usize,
    metric: DistanceMetric,
    minority_class: u32,
) -> Result<(f64, f64, f64)> {
    let subset = train.subset(kept);
    let index = NeighborIndex::build(&subset, metric)?;
    let predictions = (0..test.len())
        .map(|t| {
            let order = index.query_sorted(test.point(t), k)?;
            Ok(majority_vote(order.ranked.iter().map(|&j| subset.label(j))))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = metrics(&predictions, test.labels())?;
    let minority = subset.labels().iter().filter(|&&l| l == minority_class).count();
    Ok((m.accuracy, m.macro_f1, minority as f64 / subset.len() as f64))
}
