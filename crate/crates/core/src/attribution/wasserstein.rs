//! 1-Wasserstein scores computed from a [`ContributionHistogram`].

use serde::{Deserialize, Serialize};

use super::contributions::{prefix_sums, ContributionHistogram};
use crate::error::{Error, Result};
use crate::knn::LossSpec;

/// Slack for threshold comparisons between loss values and `tau`.
const GRID_EPS: f64 = 1e-12;

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakaParams {
    pub k: usize,
    pub l_min: f64,
    pub l_max: f64,
    pub tau: f64,
}

impl WakaParams {
    pub fn new(k: usize) -> Self {
        WakaParams {
            k,
            l_min: 0.0,
            l_max: 1.0,
            tau: DEFAULT_TAU,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_range(mut self, l_min: f64, l_max: f64) -> Self {
        self.l_min = l_min;
        self.l_max = l_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if !(0.0 <= self.l_min && self.l_min <= self.l_max && self.l_max <= 1.0) {
            return Err(Error::Argument(format!(
                "loss range [{}, {}] must satisfy 0 <= l_min <= l_max <= 1",
                self.l_min, self.l_max
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Argument(format!("tau {} outside [0, 1]", self.tau)));
        }
        Ok(())
    }
}

fn loss_at(m: usize, k: usize) -> f64 {
    m as f64 / k as f64
}

/// Utility-CDF difference: the bins reflected through `u = 1 - l` and then
/// prefix-summed in ascending utility.
pub fn utility_cdf_difference(bins: &[f64]) -> Vec<f64> {
    let reflected: Vec<f64> = bins.iter().rev().copied().collect();
    prefix_sums(&reflected)
}

/// `(1/k) * Σ |ΔF(l)|` over support points in `[l_min, l_max]`.
pub fn waka(hist: &ContributionHistogram, params: &WakaParams) -> f64 {
    waka_from_bins(&hist.bins, params)
}

pub fn waka_from_bins(bins: &[f64], params: &WakaParams) -> f64 {
    let k = bins.len() - 1;
    let cdf = prefix_sums(bins);
    cdf.iter()
        .enumerate()
        .filter(|(m, _)| {
            let l = loss_at(*m, k);
            l >= params.l_min - GRID_EPS && l <= params.l_max + GRID_EPS
        })
        .map(|(_, d)| d.abs())
        .sum::<f64>()
        / k as f64
}

/// Removal-oriented score. Matching points earn the utility-CDF gaps above
/// `1 - tau`; mismatching points lose every loss-CDF gap.
pub fn waka_rem(hist: &ContributionHistogram, params: &WakaParams, label_match: bool) -> f64 {
    let k = hist.k();
    if label_match {
        let threshold = 1.0 - params.tau;
        utility_cdf_difference(&hist.bins)
            .iter()
            .enumerate()
            .filter(|(u, _)| loss_at(*u, k) > threshold + GRID_EPS)
            .map(|(_, d)| d.abs())
            .sum()
    } else {
        -hist.cdf_difference().iter().map(|d| d.abs()).sum::<f64>()
    }
}

/// Addition-oriented score. Matching points earn every utility-CDF gap;
/// mismatching points lose the loss-CDF gaps at or below `tau`.
pub fn waka_add(hist: &ContributionHistogram, params: &WakaParams, label_match: bool) -> f64 {
    let k = hist.k();
    if label_match {
        utility_cdf_difference(&hist.bins).iter().map(|d| d.abs()).sum()
    } else {
        -hist
            .cdf_difference()
            .iter()
            .enumerate()
            .filter(|(m, _)| loss_at(*m, k) <= params.tau + GRID_EPS)
            .map(|(_, d)| d.abs())
            .sum::<f64>()
    }
}

/// Membership score split at an observed target loss: gaps at or above the
/// target loss count for membership, gaps below count against it.
pub fn t_waka(hist: &ContributionHistogram, k: usize, target_loss: f64) -> Result<f64> {
    if hist.k() != k {
        return Err(Error::Argument(format!(
            "histogram has {} bins but k = {k}",
            hist.bins.len()
        )));
    }
    let split = LossSpec::new(k)?.bin_of(target_loss)?;
    Ok(t_waka_at_bin(&hist.bins, split))
}

pub(crate) fn t_waka_at_bin(bins: &[f64], split: usize) -> f64 {
    let k = bins.len() - 1;
    let cdf = prefix_sums(bins);
    let (below, above) = cdf.split_at(split);
    (above.iter().map(|d| d.abs()).sum::<f64>() - below.iter().map(|d| d.abs()).sum::<f64>())
        / k as f64
}
