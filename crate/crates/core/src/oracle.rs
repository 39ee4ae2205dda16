//! Brute-force ground truth by exhaustive subset enumeration.
//!
//! Everything here recomputes k-NN losses from raw distances for every
//! subset, without touching the counting code in [`crate::attribution`].
//! It exists to validate that code on small instances; [`check_equivalence`]
//! runs that comparison over seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{marginal_contributions, shapley_knn};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::brute_force_order;
use crate::metric::DistanceMetric;

pub const MAX_PMF_POINTS: usize = 22;
pub const MAX_SHAPLEY_POINTS: usize = 14;

/// Loss distributions with and without the point of interest, as
/// unnormalised histograms over `{0, 1/k, ..., 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfPair {
    pub pmf_in: Vec<f64>,
    pub pmf_out: Vec<f64>,
    pub total_mass: f64,
}

impl PmfPair {
    pub fn k(&self) -> usize {
        self.pmf_in.len() - 1
    }

    /// `pmf_in - pmf_out` per bin.
    pub fn difference(&self) -> Vec<f64> {
        self.pmf_in
            .iter()
            .zip(&self.pmf_out)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn cdf_in(&self) -> Vec<f64> {
        cumulative(&self.pmf_in)
    }

    pub fn cdf_out(&self) -> Vec<f64> {
        cumulative(&self.pmf_out)
    }

    /// `(1/k) Σ |F_in(l) - F_out(l)|` over `l_min <= l <= l_max`, from the
    /// two CDFs taken separately.
    pub fn w1(&self, l_min: f64, l_max: f64) -> f64 {
        let k = self.k();
        let (fi, fo) = (self.cdf_in(), self.cdf_out());
        (0..=k)
            .filter(|&m| {
                let l = m as f64 / k as f64;
                l >= l_min - 1e-12 && l <= l_max + 1e-12
            })
            .map(|m| (fi[m] - fo[m]).abs())
            .sum::<f64>()
            / k as f64
    }

    /// Target-loss split: gaps at or above `split_bin` minus gaps below.
    pub fn t_w1(&self, split_bin: usize) -> f64 {
        let k = self.k();
        let (fi, fo) = (self.cdf_in(), self.cdf_out());
        let mut s = 0.0;
        for m in 0..=k {
            let gap = (fi[m] - fo[m]).abs();
            if m >= split_bin {
                s += gap;
            } else {
                s -= gap;
            }
        }
        s / k as f64
    }
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// All training indices sorted by `(distance to query, index)`.
fn full_sort(dataset: &Dataset, metric: DistanceMetric, query: &[f64]) -> Result<Vec<usize>> {
    let mut keyed = (0..dataset.len())
        .map(|i| metric.distance(query, dataset.point(i)).map(|d| (d, i)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Enumerates every `S ⊆ D \ {z_i}` with `|S| >= k`, adding weight
/// `2^-(N-1)` to `pmf_out` at `loss(S)` and to `pmf_in` at `loss(S ∪ {z_i})`.
///
/// With `self_first`, point `i` is ranked ahead of everything else, as in
/// self-attribution.
pub fn enumerate_pmfs(
    dataset: &Dataset,
    metric: DistanceMetric,
    i: usize,
    query: &[f64],
    y_t: u32,
    k: usize,
    self_first: bool,
) -> Result<PmfPair> {
    let n = dataset.len();
    if n > MAX_PMF_POINTS {
        return Err(Error::SizeGuard {
            n,
            limit: MAX_PMF_POINTS,
        });
    }
    if i >= n {
        return Err(Error::Argument(format!("target {i} outside dataset of {n}")));
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let mut ranked = full_sort(dataset, metric, query)?;
    if self_first {
        ranked.retain(|&r| r != i);
        ranked.insert(0, i);
    }
    let target_rank = ranked.iter().position(|&r| r == i).unwrap();
    let mismatch: Vec<bool> = ranked.iter().map(|&r| dataset.label(r) != y_t).collect();
    let others: Vec<usize> = (0..n).filter(|&r| r != target_rank).collect();

    let weight = 0.5f64.powi(n as i32 - 1);
    let mut pmf_in = vec![0.0; k + 1];
    let mut pmf_out = vec![0.0; k + 1];
    let mut total = 0.0;
    for mask in 0u32..(1u32 << others.len()) {
        if (mask.count_ones() as usize) < k {
            continue;
        }
        let member = |rank: usize, with_target: bool| -> bool {
            if rank == target_rank {
                return with_target;
            }
            let bit = if rank < target_rank { rank } else { rank - 1 };
            mask >> bit & 1 == 1
        };
        for with_target in [false, true] {
            let mut taken = 0;
            let mut bad = 0;
            for (rank, &miss) in mismatch.iter().enumerate() {
                if member(rank, with_target) {
                    taken += 1;
                    bad += miss as usize;
                    if taken == k {
                        break;
                    }
                }
            }
            if with_target {
                pmf_in[bad] += weight;
            } else {
                pmf_out[bad] += weight;
            }
        }
        total += weight;
    }
    Ok(PmfPair {
        pmf_in,
        pmf_out,
        total_mass: total,
    })
}

/// Exact Shapley values by the subset formula, with
/// `U(S) = (1/k) Σ_{j <= min(k, |S|)} [y_(j) = y_t]` and `U(∅) = 0`.
pub fn brute_shapley(
    dataset: &Dataset,
    metric: DistanceMetric,
    query: &[f64],
    y_t: u32,
    k: usize,
) -> Result<Vec<f64>> {
    let n = dataset.len();
    if n > MAX_SHAPLEY_POINTS {
        return Err(Error::SizeGuard {
            n,
            limit: MAX_SHAPLEY_POINTS,
        });
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let ranked = full_sort(dataset, metric, query)?;
    let mut rank_of = vec![0; n];
    for (r, &i) in ranked.iter().enumerate() {
        rank_of[i] = r;
    }
    let hit: Vec<f64> = ranked
        .iter()
        .map(|&r| (dataset.label(r) == y_t) as u8 as f64)
        .collect();
    // utility of a coalition given as a bitmask over ranks
    let utility = |mask: u32| -> f64 {
        let mut taken = 0;
        let mut s = 0.0;
        for (rank, h) in hit.iter().enumerate() {
            if mask >> rank & 1 == 1 {
                s += h;
                taken += 1;
                if taken == k {
                    break;
                }
            }
        }
        s / k as f64
    };
    // 1 / (N * C(N-1, s))
    let mut binom = vec![1.0f64; n];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }
    let mut values = vec![0.0; n];
    for (i, value) in values.iter_mut().enumerate() {
        let bit = 1u32 << rank_of[i];
        let mut v = 0.0;
        for mask in 0u32..(1u32 << n) {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            v += (utility(mask | bit) - utility(mask)) / (n as f64 * binom[s]);
        }
        *value = v;
    }
    Ok(values)
}

/// Shape of the random instances drawn by [`check_equivalence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSpec {
    pub trials: usize,
    pub min_n: usize,
    pub max_n: usize,
    /// Cycled through trial by trial so every value is covered.
    pub ks: Vec<usize>,
    pub seed: u64,
}

/// Largest deviations between the counting code and enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub spec: EquivalenceSpec,
    /// `max |counted bin - (pmf_in - pmf_out)|` over every bin of every trial.
    pub max_bin_deviation: f64,
    /// `max |shapley_knn - brute_shapley|` over trials small enough to
    /// enumerate Shapley values.
    pub max_shapley_deviation: f64,
    pub shapley_trials: usize,
    /// Per `k`: number of trials and largest bin deviation.
    pub per_k: Vec<(usize, usize, f64)>,
    /// Trial index holding `max_bin_deviation`.
    pub worst_trial: usize,
}

/// Draws `trials` random instances (2-d points in the unit square, two or
/// three classes, a random query, and every other trial a self query) and
/// compares the counted contribution histogram with exhaustive enumeration.
pub fn check_equivalence(spec: &EquivalenceSpec) -> Result<EquivalenceReport> {
    let max_k = spec.ks.iter().copied().max().unwrap_or(0);
    if spec.ks.is_empty() || spec.ks.contains(&0) {
        return Err(Error::Argument("k values must be non-empty and positive".into()));
    }
    if spec.min_n > spec.max_n || spec.min_n <= max_k {
        return Err(Error::Argument(format!(
            "need max_k < min_n <= max_n, got k <= {max_k}, n in [{}, {}]",
            spec.min_n, spec.max_n
        )));
    }
    if spec.max_n > MAX_PMF_POINTS {
        return Err(Error::SizeGuard {
            n: spec.max_n,
            limit: MAX_PMF_POINTS,
        });
    }
    let metric = DistanceMetric::Euclidean;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut per_k: Vec<(usize, usize, f64)> = Vec::new();
    let (mut max_bin, mut max_shapley, mut shapley_trials, mut worst) = (0.0f64, 0.0f64, 0, 0);
    for trial in 0..spec.trials {
        let k = spec.ks[trial % spec.ks.len()];
        let n = rng.random_range(spec.min_n..=spec.max_n);
        let classes = rng.random_range(2..=3u32);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels: Vec<i64> = (0..n).map(|_| rng.random_range(0..classes) as i64).collect();
        let ds = Dataset::from_rows(rows, labels)?;
        let i = rng.random_range(0..n);
        let self_query = trial % 2 == 1;
        let (query, y_t) = if self_query {
            (ds.point(i).to_vec(), ds.label(i))
        } else {
            (vec![rng.random(), rng.random()], rng.random_range(0..classes))
        };

        let mut order = brute_force_order(&ds, metric, &query, n)?;
        if self_query {
            let pos = order.position_of(i).expect("full order holds every point");
            order.ranked.remove(pos);
            order.distances.remove(pos);
            order.ranked.insert(0, i);
            order.distances.insert(0, 0.0);
        }
        let rank = order.position_of(i).expect("full order holds every point");
        let counted = marginal_contributions(&order, ds.labels(), rank, y_t, k, n)?;
        let pmfs = enumerate_pmfs(&ds, metric, i, &query, y_t, k, self_query)?;
        let dev = counted
            .bins
            .iter()
            .zip(pmfs.difference())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > max_bin || trial == 0 {
            worst = trial;
        }
        max_bin = max_bin.max(dev);
        match per_k.iter_mut().find(|e| e.0 == k) {
            Some(e) => {
                e.1 += 1;
                e.2 = e.2.max(dev);
            }
            None => per_k.push((k, 1, dev)),
        }

        if n <= MAX_SHAPLEY_POINTS && !self_query {
            let fast = shapley_knn(&order, ds.labels(), y_t, k)?;
            let brute = brute_shapley(&ds, metric, &query, y_t, k)?;
            let dev = fast.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_shapley = max_shapley.max(dev);
            shapley_trials += 1;
        }
    }
    per_k.sort_by_key(|e| e.0);
    Ok(EquivalenceReport {
        spec: spec.clone(),
        max_bin_deviation: max_bin,
        max_shapley_deviation: max_shapley,
        shapley_trials,
        per_k,
        worst_trial: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(labels: &[i64]) -> Dataset {
        let rows = (0..labels.len()).map(|i| vec![i as f64 + 1.0]).collect();
        Dataset::from_rows(rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn two_point_pmfs() {
        let ds = line(&[0, 1]);
        let p = enumerate_pmfs(&ds, DistanceMetric::Euclidean, 0, &[0.0], 0, 1, false).unwrap();
        assert_eq!(p.pmf_out, vec![0.0, 0.5]);
        assert_eq!(p.pmf_in, vec![0.5, 0.0]);
        assert_eq!(p.total_mass, 0.5);
        assert_eq!(p.w1(0.0, 1.0), 0.5);
    }

    #[test]
    fn homogeneous_labels_concentrate_at_zero() {
        let ds = line(&[0; 6]);
        let p = enumerate_pmfs(&ds, DistanceMetric::Euclidean, 2, &[0.0], 0, 2, false).unwrap();
        assert_eq!(p.pmf_in[1..], [0.0, 0.0]);
        assert_eq!(p.pmf_in[0], p.pmf_out[0]);
        assert!(p.difference().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn masses_count_large_subsets() {
        let ds = line(&[0, 1, 1, 0, 1, 0, 0]);
        let k = 3;
        let p = enumerate_pmfs(&ds, DistanceMetric::Euclidean, 1, &[0.0], 0, k, false).unwrap();
        // subsets of the 6 other points with size >= 3
        let count: u32 = (3..=6).map(|s| [1, 6, 15, 20, 15, 6, 1][s]).sum();
        let expected = count as f64 / 64.0;
        assert_eq!(p.total_mass, expected);
        assert!((p.pmf_in.iter().sum::<f64>() - expected).abs() < 1e-15);
        assert!((p.pmf_out.iter().sum::<f64>() - expected).abs() < 1e-15);
    }

    #[test]
    fn size_guards() {
        let ds = line(&[0; 23]);
        assert!(matches!(
            enumerate_pmfs(&ds, DistanceMetric::Euclidean, 0, &[0.0], 0, 1, false),
            Err(Error::SizeGuard { .. })
        ));
        let ds = line(&[0; 15]);
        assert!(matches!(
            brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 0, 1),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn brute_shapley_small_cases() {
        let ds = line(&[0]);
        assert_eq!(brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 0, 3).unwrap(), vec![1.0 / 3.0]);
        assert_eq!(brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 0, 1).unwrap(), vec![1.0]);
        assert_eq!(brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 1, 1).unwrap(), vec![0.0]);
        let ds = line(&[0, 0, 0, 0]);
        let v = brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 0, 1).unwrap();
        assert!(v.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn counting_matches_enumeration() {
        let spec = EquivalenceSpec {
            trials: 40,
            min_n: 6,
            max_n: 11,
            ks: vec![1, 2, 3, 5],
            seed: 3,
        };
        let r = check_equivalence(&spec).unwrap();
        assert!(r.max_bin_deviation <= 1e-12, "{r:?}");
        assert!(r.max_shapley_deviation <= 1e-12, "{r:?}");
        assert_eq!(r.per_k.iter().map(|e| e.1).sum::<usize>(), 40);
        assert!(r.shapley_trials > 0);
        assert_eq!(check_equivalence(&spec).unwrap(), r);
    }

    #[test]
    fn equivalence_spec_validation() {
        let mut spec = EquivalenceSpec {
            trials: 1,
            min_n: 4,
            max_n: 8,
            ks: vec![5],
            seed: 0,
        };
        assert!(check_equivalence(&spec).is_err());
        spec.ks = vec![];
        assert!(check_equivalence(&spec).is_err());
        spec.ks = vec![1];
        spec.max_n = 30;
        assert!(matches!(check_equivalence(&spec), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn dummy_points_get_zero() {
        // Every point mismatches: no coalition has positive utility.
        let ds = line(&[0, 0, 0]);
        let v = brute_shapley(&ds, DistanceMetric::Euclidean, &[0.0], 1, 2).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }
}
