//! Per-influencer decomposition of self-attribution histograms, used to
//! estimate how removing points shifts other points' self-WaKA.

use rayon::prelude::*;

use super::contributions::{ContributionCounter, ContributionHistogram};
use super::wasserstein::{waka_from_bins, WakaParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct PointContributions {
    /// The point's full self histogram.
    pub bins: Vec<f64>,
    /// `(neighbor training index, that neighbor's per-bin term)`, ascending
    /// by neighbor rank.
    pub influencers: Vec<(usize, Vec<f64>)>,
}

impl PointContributions {
    pub fn influencer(&self, j: usize) -> Option<&[f64]> {
        self.influencers
            .iter()
            .find(|(idx, _)| *idx == j)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct ContributionStore {
    k: usize,
    horizon: usize,
    points: Vec<PointContributions>,
}

impl ContributionStore {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, z: usize) -> &PointContributions {
        &self.points[z]
    }

    pub fn histogram(&self, z: usize) -> ContributionHistogram {
        ContributionHistogram {
            bins: self.points[z].bins.clone(),
            target_index: z,
            target_rank: 0,
            horizon: self.horizon,
        }
    }

    /// Self-WaKA of `z` read back from the store.
    pub fn self_waka(&self, z: usize, params: &WakaParams) -> f64 {
        waka_from_bins(&self.points[z].bins, params)
    }
}

pub fn build_contribution_store(
    dataset: &Dataset,
    index: &NeighborIndex,
    k: usize,
    horizon: usize,
) -> Result<ContributionStore> {
    let horizon = horizon.min(dataset.len());
    let counter = ContributionCounter::new(k, horizon.max(k + 1))?;
    let labels = dataset.labels();
    let points = (0..dataset.len())
        .into_par_iter()
        .map(|z| {
            let order = index.query_self(dataset, z, horizon)?;
            let mut bins = vec![0.0; k + 1];
            let mut influencers = Vec::new();
            counter.for_each_influencer(&order, labels, 0, labels[z], |_, j, term| {
                for (b, t) in bins.iter_mut().zip(term) {
                    *b += t;
                }
                influencers.push((j, term.to_vec()));
            })?;
            Ok(PointContributions { bins, influencers })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContributionStore { k, horizon, points })
}

/// Summed change in `z`'s self-WaKA from removing each point of `removed`
/// that sits in `z`'s stored neighborhood, one removal at a time.
///
/// `removed` is a membership mask over the dataset.
pub fn waka_influence(
    store: &ContributionStore,
    removed: &[bool],
    z: usize,
    params: &WakaParams,
) -> Result<f64> {
    if removed.len() != store.len() {
        return Err(Error::Argument(format!(
            "removal mask has {} entries for {} points",
            removed.len(),
            store.len()
        )));
    }
    if removed[z] {
        return Err(Error::Argument(format!("point {z} is itself in the removed set")));
    }
    let entry = &store.points[z];
    let base = waka_from_bins(&entry.bins, params);
    let mut total = 0.0;
    let mut reduced = vec![0.0; entry.bins.len()];
    for (j, term) in &entry.influencers {
        if removed[*j] {
            for ((r, b), t) in reduced.iter_mut().zip(&entry.bins).zip(term) {
                *r = b - t;
            }
            total += waka_from_bins(&reduced, params) - base;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::contributions::marginal_contributions;
    use crate::metric::DistanceMetric;
    use crate::synth::{generate_synthetic, SyntheticKind};

    fn store_fixture() -> (Dataset, NeighborIndex, ContributionStore) {
        let ds = generate_synthetic(SyntheticKind::TwoMoons, 50, 0.5, 0.3, 5).unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let store = build_contribution_store(&ds, &index, 2, 50).unwrap();
        (ds, index, store)
    }

    #[test]
    fn stored_terms_sum_to_self_histogram() {
        let (ds, index, store) = store_fixture();
        for z in 0..ds.len() {
            let order = index.query_self(&ds, z, 50).unwrap();
            let direct = marginal_contributions(&order, ds.labels(), 0, ds.label(z), 2, 50).unwrap();
            let mut sum = vec![0.0; 3];
            for (_, t) in &store.point(z).influencers {
                for (s, v) in sum.iter_mut().zip(t) {
                    *s += v;
                }
            }
            assert_eq!(sum, direct.bins);
            assert_eq!(store.point(z).bins, direct.bins);
        }
    }

    #[test]
    fn pure_neighborhood_has_no_influencers() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]],
            vec![0, 0, 0, 0],
        )
        .unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let store = build_contribution_store(&ds, &index, 1, 4).unwrap();
        assert!(store.point(0).influencers.is_empty());
        assert_eq!(store.self_waka(0, &WakaParams::new(1)), 0.0);
    }

    #[test]
    fn influence_is_zero_without_removed_neighbors() {
        let (ds, _, store) = store_fixture();
        let params = WakaParams::new(2);
        let none = vec![false; ds.len()];
        for z in 0..ds.len() {
            assert_eq!(waka_influence(&store, &none, z, &params).unwrap(), 0.0);
        }
        // removing a point outside z's influencer list changes nothing
        let z = 0;
        let outsider = (1..ds.len())
            .find(|j| store.point(z).influencer(*j).is_none())
            .unwrap();
        let mut mask = none.clone();
        mask[outsider] = true;
        assert_eq!(waka_influence(&store, &mask, z, &params).unwrap(), 0.0);
    }

    #[test]
    fn single_removal_matches_direct_w1_difference() {
        let (ds, _, store) = store_fixture();
        let params = WakaParams::new(2);
        let z = (0..ds.len()).find(|&z| !store.point(z).influencers.is_empty()).unwrap();
        let (j, term) = store.point(z).influencers[0].clone();
        let mut mask = vec![false; ds.len()];
        mask[j] = true;
        let bins = &store.point(z).bins;
        let reduced: Vec<f64> = bins.iter().zip(&term).map(|(b, t)| b - t).collect();
        let expected = waka_from_bins(&reduced, &params) - waka_from_bins(bins, &params);
        assert_eq!(waka_influence(&store, &mask, z, &params).unwrap(), expected);
    }

    #[test]
    fn removed_target_is_rejected() {
        let (ds, _, store) = store_fixture();
        let mut mask = vec![false; ds.len()];
        mask[3] = true;
        assert!(waka_influence(&store, &mask, 3, &WakaParams::new(2)).is_err());
    }
}
