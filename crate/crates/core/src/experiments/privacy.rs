//! Privacy studies: how per-point attack success relates to attribution,
//! and what happens to the remaining points when the riskiest are removed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    build_contribution_store, self_attribution_all, waka_influence, AttributionConfig, Method, WakaParams,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::mia::{per_point_asr, AsrReport, GameConfig};
use crate::stats::{equal_count_bins, mean, spearman, Spearman};

pub const PERCENTILE_BINS: usize = 20;
pub const HIGH_ASR_THRESHOLD: f64 = 0.95;

/// Self-attribution of every population point, with the attribution
/// horizon set to the attack neighborhood.
pub fn self_scores(population: &Dataset, method: Method, game: &GameConfig) -> Result<Vec<f64>> {
    let index = NeighborIndex::build(population, game.metric)?;
    let config = AttributionConfig {
        metric: game.metric,
        horizon: game.neighborhood,
        ..AttributionConfig::new(game.k)
    };
    Ok(self_attribution_all(population, &index, method, &config)?.scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileBin {
    pub bin: usize,
    pub count: usize,
    pub min_attribution: f64,
    pub max_attribution: f64,
    pub mean_attribution: f64,
    pub mean_asr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCorrelation {
    pub method: Method,
    pub bins: Vec<PercentileBin>,
    pub spearman: Spearman,
}

/// Mean ASR per equal-count attribution bin and the rank correlation.
pub fn correlate(method: Method, attribution: &[f64], asr: &[f64], bins: usize) -> Result<MethodCorrelation> {
    let spearman = spearman(attribution, asr)?;
    let groups = equal_count_bins(attribution, bins)?;
    let bins = groups
        .iter()
        .enumerate()
        .map(|(b, g)| {
            let a: Vec<f64> = g.iter().map(|&i| attribution[i]).collect();
            let r: Vec<f64> = g.iter().map(|&i| asr[i]).collect();
            PercentileBin {
                bin: b,
                count: g.len(),
                min_attribution: a.iter().copied().fold(f64::INFINITY, f64::min),
                max_attribution: a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_attribution: mean(&a),
                mean_asr: mean(&r),
            }
        })
        .collect();
    Ok(MethodCorrelation {
        method,
        bins,
        spearman,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyCorrelation {
    pub asr: AsrReport,
    pub attributions: Vec<Vec<f64>>,
    pub correlations: Vec<MethodCorrelation>,
}

impl PrivacyCorrelation {
    /// `method,bin,count,min_attribution,max_attribution,mean_attribution,mean_asr`
    pub fn write_bins(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "method",
            "bin",
            "count",
            "min_attribution",
            "max_attribution",
            "mean_attribution",
            "mean_asr",
        ])?;
        for c in &self.correlations {
            for b in &c.bins {
                w.write_record([
                    c.method.name().to_string(),
                    b.bin.to_string(),
                    b.count.to_string(),
                    format!("{:?}", b.min_attribution),
                    format!("{:?}", b.max_attribution),
                    format!("{:?}", b.mean_attribution),
                    format!("{:?}", b.mean_asr),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// `point_id,asr,<one column per method>`
    pub fn write_points(&self, population: &Dataset, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["point_id".to_string(), "asr".to_string()];
        header.extend(self.correlations.iter().map(|c| c.method.name().to_string()));
        w.write_record(&header)?;
        for (row, &p) in self.asr.points.iter().enumerate() {
            let mut rec = vec![population.point_id(p), format!("{:?}", self.asr.asr[row])];
            rec.extend(self.attributions.iter().map(|a| format!("{:?}", a[row])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn run_privacy_correlation(
    population: &Dataset,
    game: &GameConfig,
    methods: &[Method],
    fpr_levels: &[f64],
) -> Result<PrivacyCorrelation> {
    if game.games < 8 {
        return Err(Error::Argument(format!(
            "privacy correlation needs at least 8 games, got {}",
            game.games
        )));
    }
    if methods.is_empty() {
        return Err(Error::Argument("no attribution methods given".into()));
    }
    let points: Vec<usize> = (0..population.len()).collect();
    let asr = per_point_asr(population, game, &points, fpr_levels)?;
    let mut attributions = Vec::with_capacity(methods.len());
    let mut correlations = Vec::with_capacity(methods.len());
    for &method in methods {
        let scores = self_scores(population, method, game)?;
        correlations.push(correlate(method, &scores, &asr.asr, PERCENTILE_BINS.min(population.len()))?);
        attributions.push(scores);
    }
    Ok(PrivacyCorrelation {
        asr,
        attributions,
        correlations,
    })
}

/// How the points to remove are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnionRanking {
    /// Highest self-attribution first.
    SelfAttribution(Method),
    /// Highest baseline ASR first.
    Asr,
    /// A seeded random selection.
    Random(u64),
}

impl std::str::FromStr for OnionRanking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asr" => Ok(OnionRanking::Asr),
            "random" => Ok(OnionRanking::Random(0)),
            other => other.parse().map(OnionRanking::SelfAttribution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnionReport {
    pub removal_fraction: f64,
    pub ranking: OnionRanking,
    /// Population indices of the removed points, in removal-rank order.
    pub removed: Vec<usize>,
    /// Population indices of the survivors, ascending.
    pub survivors: Vec<usize>,
    /// Baseline ASR of every population point.
    pub asr_full: Vec<f64>,
    /// Baseline and post-removal ASR aligned on `survivors`.
    pub asr_before: Vec<f64>,
    pub asr_after: Vec<f64>,
    /// Summed self-WaKA change of each survivor from the removed set.
    pub wakainf: Vec<f64>,
    pub auc_before: f64,
    pub auc_after: f64,
    /// Points with ASR at or above [`HIGH_ASR_THRESHOLD`]: over the whole
    /// population before removal, over the survivors before, and over the
    /// survivors after.
    pub high_asr_population_before: usize,
    pub high_asr_survivors_before: usize,
    pub high_asr_survivors_after: usize,
    /// `Spearman(ΔASR, WaKAInf)`, absent when either side is constant.
    pub influence_correlation: Option<Spearman>,
}

impl OnionReport {
    pub fn delta_asr(&self) -> Vec<f64> {
        self.asr_after
            .iter()
            .zip(&self.asr_before)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// `point_id,asr_before,asr_after,delta_asr,wakainf`
    pub fn write_points(&self, population: &Dataset, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["point_id", "asr_before", "asr_after", "delta_asr", "wakainf"])?;
        for (row, &p) in self.survivors.iter().enumerate() {
            w.write_record([
                population.point_id(p),
                format!("{:?}", self.asr_before[row]),
                format!("{:?}", self.asr_after[row]),
                format!("{:?}", self.asr_after[row] - self.asr_before[row]),
                format!("{:?}", self.wakainf[row]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// ASR histograms over `[0, 1]`: the full population before removal
    /// and the survivors after.
    /// `bin_lower,bin_upper,population_before,survivors_after`
    pub fn write_histogram(&self, path: &Path, bins: usize) -> Result<()> {
        let before = asr_histogram(&self.asr_full, bins);
        let after = asr_histogram(&self.asr_after, bins);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_lower", "bin_upper", "population_before", "survivors_after"])?;
        for b in 0..bins {
            w.write_record([
                format!("{:?}", b as f64 / bins as f64),
                format!("{:?}", (b + 1) as f64 / bins as f64),
                before[b].to_string(),
                after[b].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Counts per equal-width bin over `[0, 1]`; 1.0 falls in the last bin.
pub fn asr_histogram(asr: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &a in asr {
        let b = ((a * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Removes the top `ceil(fraction * N)` points under `ranking` (ties by
/// index), replays the same games on the survivors, and relates each
/// survivor's ASR change to its WaKA influence from the removed set.
pub fn run_onion(
    population: &Dataset,
    game: &GameConfig,
    removal_fraction: f64,
    ranking: OnionRanking,
    fpr_levels: &[f64],
) -> Result<OnionReport> {
    if !(0.0..=0.5).contains(&removal_fraction) {
        return Err(Error::Argument(format!(
            "removal fraction {removal_fraction} is outside [0, 0.5]"
        )));
    }
    let n = population.len();
    let all: Vec<usize> = (0..n).collect();
    let before = per_point_asr(population, game, &all, fpr_levels)?;

    let to_remove = (removal_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut order = all.clone();
    match ranking {
        OnionRanking::SelfAttribution(method) => {
            let s = self_scores(population, method, game)?;
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        }
        OnionRanking::Asr => {
            let s = &before.asr;
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        }
        OnionRanking::Random(seed) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    let removed: Vec<usize> = order[..to_remove].to_vec();
    let mut removed_mask = vec![false; n];
    for &r in &removed {
        removed_mask[r] = true;
    }
    let survivors: Vec<usize> = all.iter().copied().filter(|&i| !removed_mask[i]).collect();

    let (asr_after, auc_after) = if removed.is_empty() {
        (before.asr.clone(), before.roc.auc)
    } else {
        let reduced = population.subset(&survivors);
        let local: Vec<usize> = (0..reduced.len()).collect();
        let after = per_point_asr(&reduced, game, &local, fpr_levels)?;
        (after.asr, after.roc.auc)
    };

    let wakainf = if removed.is_empty() {
        vec![0.0; survivors.len()]
    } else {
        let index = NeighborIndex::build(population, game.metric)?;
        let store = build_contribution_store(population, &index, game.k, game.neighborhood)?;
        let params = WakaParams::new(game.k);
        survivors
            .iter()
            .map(|&z| waka_influence(&store, &removed_mask, z, &params))
            .collect::<Result<Vec<_>>>()?
    };

    let asr_before: Vec<f64> = survivors.iter().map(|&i| before.asr[i]).collect();
    let high = |v: &[f64]| v.iter().filter(|&&a| a >= HIGH_ASR_THRESHOLD).count();
    let delta: Vec<f64> = asr_after.iter().zip(&asr_before).map(|(a, b)| a - b).collect();
    let influence_correlation = match spearman(&delta, &wakainf) {
        Ok(s) => Some(s),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(OnionReport {
        removal_fraction,
        ranking,
        high_asr_population_before: high(&before.asr),
        high_asr_survivors_before: high(&asr_before),
        high_asr_survivors_after: high(&asr_after),
        removed,
        survivors,
        asr_full: before.asr,
        asr_before,
        asr_after,
        wakainf,
        auc_before: before.roc.auc,
        auc_after,
        influence_correlation,
    })
}
