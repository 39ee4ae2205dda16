//! Exact counting of how much loss-distribution mass a single training point
//! moves.
//!
//! Both loss distributions are taken over paired training subsets
//! `(S, S ∪ {z_i})` with `S ⊆ D \ {z_i}` and `|S| >= k`, each pair weighted
//! `2^-(N-1)`. Adding `z_i` changes the loss at the query only when `z_i`
//! displaces the current k-th neighbor `z_j` of `S`. For a displaced point at
//! 1-based rank `j`, the subsets in which that happens consist of `k-1`
//! points chosen among the `j-2` ranks before `j` other than `z_i`, plus any
//! subset of the `N-j` ranks after `j`. Normalising gives a per-bin term
//!
//! ```text
//! (Count - Count_without) / 2^(j-1)
//! Count         = C(CPV[j], PV - [z_i matches]) * C(CNV[j], NV - [z_i mismatches])
//! Count_without = C(CPV[j], PV - [z_j matches]) * C(CNV[j], NV - [z_j mismatches])
//! ```
//!
//! where `CPV[j]`/`CNV[j]` count matching/mismatching labels strictly before
//! rank `j`, excluding `z_i`, and a binomial with a negative or oversized
//! lower argument is zero. Only displaced points whose label differs from
//! `z_i` can contribute.

use crate::error::{Error, Result};
use crate::index::NeighborOrder;

/// Signed per-bin mass difference `P_with(l) - P_without(l)` over the loss
/// support `{0, 1/k, ..., 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionHistogram {
    pub bins: Vec<f64>,
    /// Training index of the point of interest.
    pub target_index: usize,
    /// 0-based rank of the point of interest in the query's order.
    pub target_rank: usize,
    pub horizon: usize,
}

impl ContributionHistogram {
    pub fn zeros(k: usize, target_index: usize, target_rank: usize, horizon: usize) -> Self {
        ContributionHistogram {
            bins: vec![0.0; k + 1],
            target_index,
            target_rank,
            horizon,
        }
    }

    pub fn k(&self) -> usize {
        self.bins.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }

    /// Difference of the two loss CDFs at each support point.
    pub fn cdf_difference(&self) -> Vec<f64> {
        prefix_sums(&self.bins)
    }
}

pub(crate) fn prefix_sums(bins: &[f64]) -> Vec<f64> {
    bins.iter()
        .scan(0.0, |acc, &b| {
            *acc += b;
            Some(*acc)
        })
        .collect()
}

/// Binomial coefficients `C(n, r)` for `n <= max_n`, `r <= max_r`, stored as
/// `f64` (exact below 2^53).
#[derive(Debug, Clone)]
pub struct BinomialTable {
    max_r: usize,
    rows: Vec<f64>,
}

impl BinomialTable {
    pub fn new(max_n: usize, max_r: usize) -> Self {
        let width = max_r + 1;
        let mut rows = vec![0.0; (max_n + 1) * width];
        for n in 0..=max_n {
            rows[n * width] = 1.0;
            for r in 1..=max_r.min(n) {
                let above = rows[(n - 1) * width + r];
                let diag = rows[(n - 1) * width + r - 1];
                rows[n * width + r] = above + diag;
            }
        }
        BinomialTable { max_r, rows }
    }

    /// `C(n, r)`, zero when `r < 0` or `r > n`.
    #[inline]
    pub fn get(&self, n: usize, r: isize) -> f64 {
        if r < 0 || r as usize > n {
            return 0.0;
        }
        let r = r as usize;
        debug_assert!(r <= self.max_r);
        self.rows[n * (self.max_r + 1) + r]
    }
}

/// Reusable counter for one `(k, horizon)` configuration.
#[derive(Debug, Clone)]
pub struct ContributionCounter {
    k: usize,
    horizon: usize,
    table: BinomialTable,
}

impl ContributionCounter {
    pub fn new(k: usize, horizon: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if horizon < k + 1 {
            return Err(Error::Argument(format!(
                "horizon {horizon} must be at least k + 1 = {}",
                k + 1
            )));
        }
        Ok(ContributionCounter {
            k,
            horizon,
            table: BinomialTable::new(horizon, k),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Per-bin contributions of the point at `target_rank` (0-based) in
    /// `order`, with labels compared against `y_t`.
    pub fn histogram(
        &self,
        order: &NeighborOrder,
        labels: &[u32],
        target_rank: usize,
        y_t: u32,
    ) -> Result<ContributionHistogram> {
        let horizon = self.horizon.min(order.len());
        if target_rank >= order.len() {
            return Err(Error::Argument(format!(
                "target rank {target_rank} outside order of length {}",
                order.len()
            )));
        }
        let mut hist =
            ContributionHistogram::zeros(self.k, order.ranked[target_rank], target_rank, horizon);
        self.for_each_influencer(order, labels, target_rank, y_t, |_, _, term| {
            for (b, t) in hist.bins.iter_mut().zip(term) {
                *b += t;
            }
        })?;
        Ok(hist)
    }

    /// Calls `visit(rank, training_index, term)` for every displaced point
    /// that moves mass, where `term` is its per-bin contribution.
    pub fn for_each_influencer(
        &self,
        order: &NeighborOrder,
        labels: &[u32],
        target_rank: usize,
        y_t: u32,
        mut visit: impl FnMut(usize, usize, &[f64]),
    ) -> Result<()> {
        let horizon = self.horizon.min(order.len());
        if target_rank >= order.len() {
            return Err(Error::Argument(format!(
                "target rank {target_rank} outside order of length {}",
                order.len()
            )));
        }
        let k = self.k;
        let y_i = labels[order.ranked[target_rank]];
        let i_matches = y_i == y_t;
        let (d_pv_i, d_nv_i) = (i_matches as isize, !i_matches as isize);

        let mut term = vec![0.0; k + 1];
        let (mut cpv, mut cnv) = (0usize, 0usize);
        for rank in 0..horizon {
            let idx = order.ranked[rank];
            let y_j = labels[idx];
            let j_matches = y_j == y_t;
            // 1-based rank j = rank + 1; cpv/cnv cover ranks strictly before j.
            if rank > target_rank && rank >= k && y_j != y_i && j_matches != i_matches {
                let (d_pv_j, d_nv_j) = (j_matches as isize, !j_matches as isize);
                let weight = 0.5f64.powi(rank as i32);
                for (nv, slot) in term.iter_mut().enumerate() {
                    let nv = nv as isize;
                    let pv = k as isize - nv;
                    let with = self.table.get(cpv, pv - d_pv_i) * self.table.get(cnv, nv - d_nv_i);
                    let without = self.table.get(cpv, pv - d_pv_j) * self.table.get(cnv, nv - d_nv_j);
                    *slot = (with - without) * weight;
                }
                visit(rank, idx, &term);
            }
            if rank != target_rank {
                if j_matches {
                    cpv += 1;
                } else {
                    cnv += 1;
                }
            }
        }
        Ok(())
    }
}

/// One-shot form of [`ContributionCounter::histogram`].
pub fn marginal_contributions(
    order: &NeighborOrder,
    labels: &[u32],
    target_rank: usize,
    y_t: u32,
    k: usize,
    horizon: usize,
) -> Result<ContributionHistogram> {
    ContributionCounter::new(k, horizon.min(order.len()).max(k + 1))?.histogram(order, labels, target_rank, y_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_order(n: usize) -> NeighborOrder {
        NeighborOrder {
            ranked: (0..n).collect(),
            distances: (0..n).map(|i| i as f64).collect(),
        }
    }

    #[test]
    fn binomial_table_values() {
        let t = BinomialTable::new(10, 4);
        assert_eq!(t.get(5, 2), 10.0);
        assert_eq!(t.get(10, 4), 210.0);
        assert_eq!(t.get(3, 4), 0.0);
        assert_eq!(t.get(3, -1), 0.0);
        assert_eq!(t.get(0, 0), 1.0);
    }

    #[test]
    fn same_label_tail_gives_zero() {
        let order = identity_order(8);
        let labels = [0, 1, 1, 1, 1, 1, 1, 1];
        let h = marginal_contributions(&order, &labels, 1, 0, 2, 8).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn last_rank_gives_zero() {
        let order = identity_order(6);
        let labels = [0, 1, 0, 1, 1, 0];
        let h = marginal_contributions(&order, &labels, 5, 0, 1, 6).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn two_point_instance() {
        // z_1 matches the query label, z_2 does not, k = 1.
        let order = identity_order(2);
        let h = marginal_contributions(&order, &[0, 1], 0, 0, 1, 2).unwrap();
        assert_eq!(h.bins, vec![0.5, -0.5]);
    }

    #[test]
    fn out_of_range_rank_is_rejected() {
        let order = identity_order(3);
        assert!(marginal_contributions(&order, &[0, 1, 0], 3, 0, 1, 3).is_err());
    }

    #[test]
    fn influencer_terms_sum_to_histogram() {
        let order = identity_order(12);
        let labels = [1, 0, 2, 0, 1, 1, 0, 2, 0, 1, 0, 0];
        let counter = ContributionCounter::new(3, 12).unwrap();
        let hist = counter.histogram(&order, &labels, 1, 0).unwrap();
        let mut sum = vec![0.0; 4];
        counter
            .for_each_influencer(&order, &labels, 1, 0, |_, _, t| {
                for (s, v) in sum.iter_mut().zip(t) {
                    *s += v;
                }
            })
            .unwrap();
        assert_eq!(sum, hist.bins);
    }
}
