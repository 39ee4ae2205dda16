//! Membership scorers. Every scorer is oriented so that larger values mean
//! "more likely a member" and `0` is the member/non-member boundary.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::attribution::{t_waka, t_waka_at_bin, ContributionCounter};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::{NeighborIndex, NeighborOrder};
use crate::knn::{knn_mismatches, subset_loss_in_order, LossSpec};
use crate::metric::DistanceMetric;

/// Number of shadow re-draws tolerated before LiRA gives up.
pub const LIRA_MAX_ATTEMPTS: usize = 5;

/// Standardisation guard for the calibrated confidence attack.
pub const CALIBRATION_EPSILON: f64 = 1e-6;

/// Self-configuration contribution bins of population point `z`.
pub fn self_histogram_bins(
    population: &Dataset,
    index: &NeighborIndex,
    counter: &ContributionCounter,
    z: usize,
) -> Result<Vec<f64>> {
    let order = index.query_self(population, z, counter.horizon())?;
    Ok(counter
        .histogram(&order, population.labels(), 0, population.label(z))?
        .bins)
}

/// t-WaKA membership score of population point `z` given the loss the
/// target model assigns to it.
pub fn twaka_score(
    population: &Dataset,
    index: &NeighborIndex,
    z: usize,
    target_loss: f64,
    k: usize,
    neighborhood: usize,
) -> Result<f64> {
    let counter = ContributionCounter::new(k, neighborhood.min(population.len()).max(k + 1))?;
    let order = index.query_self(population, z, counter.horizon())?;
    let hist = counter.histogram(&order, population.labels(), 0, population.label(z))?;
    t_waka(&hist, k, target_loss)
}

/// Cached self histograms for a set of population points, so that repeated
/// games only redo the split at the observed loss.
#[derive(Debug, Clone)]
pub struct TwakaTable {
    bins: Vec<Option<Vec<f64>>>,
}

impl TwakaTable {
    pub fn build(
        population: &Dataset,
        index: &NeighborIndex,
        k: usize,
        neighborhood: usize,
        points: &[usize],
    ) -> Result<Self> {
        let counter = ContributionCounter::new(k, neighborhood.min(population.len()).max(k + 1))?;
        let computed = points
            .par_iter()
            .map(|&z| self_histogram_bins(population, index, &counter, z).map(|b| (z, b)))
            .collect::<Result<Vec<_>>>()?;
        let mut bins = vec![None; population.len()];
        for (z, b) in computed {
            bins[z] = Some(b);
        }
        Ok(TwakaTable { bins })
    }

    pub fn score(&self, z: usize, loss_bin: usize) -> Result<f64> {
        let bins = self.bins[z]
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("no cached histogram for point {z}")))?;
        Ok(t_waka_at_bin(bins, loss_bin))
    }
}

/// Smoothed log-likelihood ratio from shadow losses (given as loss bins):
/// `log((P_in(l*) + λ) / (P_out(l*) + λ))` with `λ = 1 / (shadows (k + 1))`.
pub fn lira_from_losses(in_losses: &[usize], out_losses: &[usize], target_bin: usize, k: usize) -> Result<f64> {
    if in_losses.is_empty() || out_losses.is_empty() {
        return Err(Error::DegenerateSampling { attempts: 1 });
    }
    let shadows = (in_losses.len() + out_losses.len()) as f64;
    let lambda = 1.0 / (shadows * (k + 1) as f64);
    let freq = |v: &[usize]| v.iter().filter(|&&m| m == target_bin).count() as f64 / v.len() as f64;
    Ok(((freq(in_losses) + lambda) / (freq(out_losses) + lambda)).ln())
}

/// Online LiRA for population point `z`: each shadow is trained on a random
/// half of the rest of the population, with `z` added by a fair coin.
///
/// A shadow k-NN's prediction at `z` only depends on the first `k` shadow
/// members along `z`'s population ordering, so shadows are evaluated by
/// filtering that ordering instead of building an index per shadow.
#[allow(clippy::too_many_arguments)]
pub fn lira_score<R: Rng>(
    population: &Dataset,
    index: &NeighborIndex,
    z: usize,
    target_loss: f64,
    k: usize,
    shadows: usize,
    rng: &mut R,
) -> Result<f64> {
    if shadows < 2 {
        return Err(Error::Argument("LiRA needs at least two shadow models".into()));
    }
    let n = population.len();
    if n < 2 * k + 2 {
        return Err(Error::Argument(format!(
            "population of {n} is too small for {k}-NN shadow halves"
        )));
    }
    let target_bin = LossSpec::new(k)?.bin_of(target_loss)?;
    let order = index.query_self(population, z, n)?;
    let labels = population.labels();
    let y = labels[z];
    let others: Vec<usize> = (0..n).filter(|&j| j != z).collect();
    let half = n / 2;
    for _ in 0..LIRA_MAX_ATTEMPTS {
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for _ in 0..shadows {
            let mut member = vec![false; n];
            for &j in others.choose_multiple(rng, half) {
                member[j] = true;
            }
            let with_z = rng.random_bool(0.5);
            member[z] = with_z;
            let loss = subset_loss_in_order(&order, labels, |j| member[j], y, k)
                .ok_or(Error::InsufficientNeighbors {
                    needed: k,
                    available: half,
                })?;
            if with_z {
                ins.push(loss);
            } else {
                outs.push(loss);
            }
        }
        if !ins.is_empty() && !outs.is_empty() {
            return lira_from_losses(&ins, &outs, target_bin, k);
        }
    }
    Err(Error::DegenerateSampling {
        attempts: LIRA_MAX_ATTEMPTS,
    })
}

/// A set of shadow k-NN models trained on halves of the population. Shadows
/// come in complementary pairs, so every point is a member of exactly half
/// of them (plus possibly one more when the count is odd).
#[derive(Debug)]
pub struct ShadowBank {
    k: usize,
    shadows: Vec<Shadow>,
}

#[derive(Debug)]
struct Shadow {
    member: Vec<bool>,
    index: NeighborIndex,
}

impl ShadowBank {
    pub fn train<R: Rng>(
        population: &Dataset,
        metric: DistanceMetric,
        k: usize,
        shadows: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if shadows < 2 {
            return Err(Error::Argument("LiRA needs at least two shadow models".into()));
        }
        let n = population.len();
        if n / 2 < k {
            return Err(Error::Argument(format!(
                "population of {n} is too small for {k}-NN shadow halves"
            )));
        }
        let mut splits = Vec::with_capacity(shadows);
        let mut perm: Vec<usize> = (0..n).collect();
        while splits.len() < shadows {
            perm.shuffle(rng);
            let mut member = vec![false; n];
            for &j in &perm[..n / 2] {
                member[j] = true;
            }
            let complement: Vec<bool> = member.iter().map(|m| !m).collect();
            splits.push(member);
            if splits.len() < shadows {
                splits.push(complement);
            }
        }
        let shadows = splits
            .into_iter()
            .map(|member| {
                let rows: Vec<usize> = (0..n).filter(|&j| member[j]).collect();
                let index = NeighborIndex::build(&population.subset(&rows), metric)?;
                Ok(Shadow { member, index })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShadowBank { k, shadows })
    }

    pub fn len(&self) -> usize {
        self.shadows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shadows.is_empty()
    }

    /// Shadow losses (as mismatch counts) of population point `z`, split by
    /// whether `z` was in the shadow's training half.
    pub fn losses(&self, population: &Dataset, z: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for s in &self.shadows {
            let order = s.index.query_sorted(population.point(z), self.k)?;
            let m = knn_mismatches(&order, s.index.labels(), population.label(z), self.k)?;
            if s.member[z] {
                ins.push(m);
            } else {
                outs.push(m);
            }
        }
        Ok((ins, outs))
    }

    pub fn score(&self, population: &Dataset, z: usize, target_bin: usize) -> Result<f64> {
        let (ins, outs) = self.losses(population, z)?;
        lira_from_losses(&ins, &outs, target_bin, self.k)
    }
}

/// The `neighborhood` nearest population points to `z`, excluding `z`.
pub fn reference_neighborhood(
    population: &Dataset,
    index: &NeighborIndex,
    z: usize,
    neighborhood: usize,
) -> Result<NeighborOrder> {
    let mut order = index.query_self(population, z, neighborhood + 1)?;
    order.ranked.remove(0);
    order.distances.remove(0);
    Ok(order)
}

/// Confidence attack: compares the target model's confidence at `z` with
/// reference k-NNs built on `z`'s population neighborhood.
///
/// Uncalibrated, the reference is a single k-NN on the whole neighborhood
/// and the score is the confidence gap. Calibrated, `reference_models`
/// random half-neighborhoods are drawn and the gap is standardised.
#[allow(clippy::too_many_arguments)]
pub fn conf_score<R: Rng>(
    population: &Dataset,
    index: &NeighborIndex,
    z: usize,
    target_confidence: f64,
    k: usize,
    neighborhood: usize,
    calibrated: bool,
    reference_models: usize,
    rng: &mut R,
) -> Result<f64> {
    let hood = reference_neighborhood(population, index, z, neighborhood)?;
    let labels = population.labels();
    let y = labels[z];
    let needed = if calibrated { 2 * k } else { k };
    if hood.len() < needed {
        return Err(Error::Argument(format!(
            "neighborhood of {} points is too small for k = {k}",
            hood.len()
        )));
    }
    if !calibrated {
        let conf_ref = 1.0 - knn_mismatches(&hood, labels, y, k)? as f64 / k as f64;
        return Ok(target_confidence - conf_ref);
    }
    if reference_models == 0 {
        return Err(Error::Argument("need at least one reference model".into()));
    }
    let positions: Vec<usize> = (0..hood.len()).collect();
    let half = hood.len() / 2;
    let mut confs = Vec::with_capacity(reference_models);
    for _ in 0..reference_models {
        let mut chosen = positions.choose_multiple(rng, half).copied().collect::<Vec<_>>();
        chosen.sort_unstable();
        let mismatches = chosen[..k]
            .iter()
            .filter(|&&p| labels[hood.ranked[p]] != y)
            .count();
        confs.push(1.0 - mismatches as f64 / k as f64);
    }
    let mean = crate::stats::mean(&confs);
    let std = crate::stats::std_dev(&confs);
    Ok((target_confidence - mean) / (std + CALIBRATION_EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lira_ratio_cases() {
        // identical empirical likelihoods
        assert_eq!(lira_from_losses(&[0, 1, 1, 0], &[1, 0, 0, 1], 1, 1).unwrap(), 0.0);
        // loss seen only among in-shadows
        assert!(lira_from_losses(&[0, 0, 0], &[1, 1, 1], 0, 1).unwrap() > 0.0);
        assert!(lira_from_losses(&[], &[1], 0, 1).is_err());
    }

    #[test]
    fn lira_hand_computed_ratio() {
        // 16 shadows, k = 3, l* = 1/3 (bin 1): in-shadows {0,0,1,0,1,0,0,0},
        // out-shadows {1,2,1,1,0,3,1,2}.
        let ins = [0, 0, 1, 0, 1, 0, 0, 0];
        let outs = [1, 2, 1, 1, 0, 3, 1, 2];
        let lambda: f64 = 1.0 / (16.0 * 4.0);
        let expected = ((2.0 / 8.0 + lambda) / (4.0 / 8.0 + lambda)).ln();
        assert_eq!(lira_from_losses(&ins, &outs, 1, 3).unwrap(), expected);
    }

    #[test]
    fn lira_on_small_pool_matches_fixed_shadow_outcomes() {
        // A 12-point pool on a line; with the seeded draws replayed by hand,
        // the per-shadow losses and the resulting log-ratio agree.
        let rows = (0..12).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0];
        let ds = Dataset::from_rows(rows, labels).unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let (z, k, shadows) = (4usize, 1usize, 16usize);
        let score = lira_score(&ds, &index, z, 0.0, k, shadows, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let others: Vec<usize> = (0..12).filter(|&j| j != z).collect();
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for _ in 0..shadows {
            let mut member = [false; 12];
            for &j in others.choose_multiple(&mut rng, 6) {
                member[j] = true;
            }
            let with_z = rng.random_bool(0.5);
            member[z] = with_z;
            // nearest member by |x - 4|, ties toward the lower index
            let nearest = (0..12usize)
                .filter(|&j| member[j])
                .min_by_key(|&j| ((j as i64 - 4).abs(), j))
                .unwrap();
            let loss = usize::from(ds.label(nearest) != ds.label(z));
            if with_z {
                ins.push(loss);
            } else {
                outs.push(loss);
            }
        }
        assert!(ins.iter().all(|&l| l == 0));
        let lambda: f64 = 1.0 / 32.0;
        let p_out = outs.iter().filter(|&&l| l == 0).count() as f64 / outs.len() as f64;
        let expected = ((1.0 + lambda) / (p_out + lambda)).ln();
        assert!((score - expected).abs() < 1e-15);
    }

    #[test]
    fn shadow_bank_pairs_balance_membership() {
        let ds = generate_synthetic(SyntheticKind::TwoMoons, 60, 0.5, 0.2, 4).unwrap();
        let bank = ShadowBank::train(&ds, DistanceMetric::Euclidean, 1, 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(bank.len(), 8);
        for z in 0..ds.len() {
            let (ins, outs) = bank.losses(&ds, z).unwrap();
            assert_eq!((ins.len(), outs.len()), (4, 4));
            // at k = 1 a member is its own nearest neighbor
            assert!(ins.iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn twaka_score_edge_cases() {
        let ds = generate_synthetic(SyntheticKind::TwoMoons, 80, 0.5, 0.3, 9).unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let counter = ContributionCounter::new(3, 40).unwrap();
        for z in 0..10 {
            let bins = self_histogram_bins(&ds, &index, &counter, z).unwrap();
            let w1 = crate::attribution::waka_from_bins(&bins, &crate::attribution::WakaParams::new(3));
            let s = twaka_score(&ds, &index, z, 0.0, 3, 40).unwrap();
            assert!((s - w1).abs() < 1e-15 && s >= 0.0);
        }
        let homogeneous = Dataset::from_rows((0..12).map(|i| vec![i as f64]).collect(), vec![2; 12]).unwrap();
        let index = NeighborIndex::build(&homogeneous, DistanceMetric::Euclidean).unwrap();
        for loss in [0.0, 0.5, 1.0] {
            assert_eq!(twaka_score(&homogeneous, &index, 5, loss, 2, 12).unwrap(), 0.0);
        }
        assert!(twaka_score(&homogeneous, &index, 5, 0.3, 2, 12).is_err());
    }

    #[test]
    fn conf_scores() {
        let ds = generate_synthetic(SyntheticKind::TwoMoons, 200, 0.5, 0.2, 5).unwrap();
        let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).unwrap();
        let hood = reference_neighborhood(&ds, &index, 7, 100).unwrap();
        assert!(!hood.ranked.contains(&7));
        let conf_ref = 1.0 - knn_mismatches(&hood, ds.labels(), ds.label(7), 5).unwrap() as f64 / 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = conf_score(&ds, &index, 7, conf_ref, 5, 100, false, 16, &mut rng).unwrap();
        assert_eq!(s, 0.0);
        let a = conf_score(&ds, &index, 7, 0.8, 5, 100, true, 16, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = conf_score(&ds, &index, 7, 0.8, 5, 100, true, 16, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        // homogeneous neighborhood: every reference confidence is 1
        let flat = Dataset::from_rows((0..30).map(|i| vec![i as f64]).collect(), vec![0; 30]).unwrap();
        let findex = NeighborIndex::build(&flat, DistanceMetric::Euclidean).unwrap();
        let s = conf_score(&flat, &findex, 3, 1.0, 3, 20, true, 8, &mut rng).unwrap();
        assert_eq!(s, 0.0);
    }
}
