//! Exact k-NN Shapley values and leave-one-out scores.

use crate::error::{Error, Result};
use crate::index::NeighborOrder;

/// Exact Shapley values of every training point for the utility at one
/// query, returned in dataset order.
///
/// Runs the farthest-to-nearest recursion over a complete ordering; the
/// utility of a coalition smaller than `k` averages over `k` slots and the
/// empty coalition has utility zero.
pub fn shapley_knn(order: &NeighborOrder, labels: &[u32], y_t: u32, k: usize) -> Result<Vec<f64>> {
    let n = labels.len();
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Argument("empty training set".into()));
    }
    if order.len() != n {
        return Err(Error::Argument(format!(
            "Shapley recursion needs the full ordering of {n} points, got {}",
            order.len()
        )));
    }
    let hit = |rank: usize| (labels[order.ranked[rank]] == y_t) as u8 as f64;
    let mut values = vec![0.0; n];
    // the farthest point counts only in coalitions smaller than k
    let mut current = hit(n - 1) * k.min(n) as f64 / (k * n) as f64;
    values[order.ranked[n - 1]] = current;
    for rank in (0..n - 1).rev() {
        let i = rank + 1;
        current += (hit(rank) - hit(rank + 1)) / k as f64 * (k.min(i) as f64 / i as f64);
        values[order.ranked[rank]] = current;
    }
    Ok(values)
}

/// `U(D) - U(D \ {z_i})` for training point `index`.
///
/// Only the first `k + 1` ranks of `order` are consulted.
pub fn loo(order: &NeighborOrder, labels: &[u32], index: usize, y_t: u32, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if order.len() <= k {
        return Err(Error::InsufficientNeighbors {
            needed: k + 1,
            available: order.len(),
        });
    }
    match order.ranked[..k].iter().position(|&r| r == index) {
        None => Ok(0.0),
        Some(_) => {
            let hit = |j: usize| (labels[j] == y_t) as u8 as f64;
            Ok((hit(index) - hit(order.ranked[k])) / k as f64)
        }
    }
}

/// LOO scores for every training point at one query (zeros outside the top k).
pub fn loo_all(order: &NeighborOrder, labels: &[u32], y_t: u32, k: usize, n: usize) -> Result<Vec<f64>> {
    if order.len() <= k {
        return Err(Error::InsufficientNeighbors {
            needed: k + 1,
            available: order.len(),
        });
    }
    let mut values = vec![0.0; n];
    for &idx in &order.ranked[..k] {
        values[idx] = loo(order, labels, idx, y_t, k)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order_of(n: usize) -> NeighborOrder {
        NeighborOrder {
            ranked: (0..n).collect(),
            distances: (0..n).map(|i| i as f64).collect(),
        }
    }

    #[test]
    fn homogeneous_labels_give_uniform_values() {
        for n in 1..12 {
            for k in 1..6 {
                let v = shapley_knn(&order_of(n), &vec![2; n], 2, k).unwrap();
                // U(D) = min(k, n) / k, shared equally
                let expected = 1.0 / n.max(k) as f64;
                assert!(v.iter().all(|&x| (x - expected).abs() < 1e-15), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn farthest_point_base_case() {
        let labels = [0, 1, 0, 1, 1];
        let v = shapley_knn(&order_of(5), &labels, 1, 3).unwrap();
        assert_eq!(v[4], 0.2);
    }

    #[test]
    fn fewer_points_than_k() {
        // every matching point always sits among the k nearest: 1/k each
        let v = shapley_knn(&order_of(2), &[1, 1], 1, 5).unwrap();
        assert_eq!(v, vec![0.2, 0.2]);
        let v = shapley_knn(&order_of(3), &[1, 0, 1], 1, 4).unwrap();
        assert_eq!(v, vec![0.25, 0.0, 0.25]);
    }

    #[test]
    fn truncated_order_is_rejected() {
        let order = order_of(3);
        assert!(shapley_knn(&order, &[0, 0, 0, 0], 0, 1).is_err());
    }

    #[test]
    fn loo_cases() {
        let order = order_of(6);
        let labels = [0, 0, 1, 1, 0, 0];
        // rank k + 3 is never displaced
        assert_eq!(loo(&order, &labels, 4, 0, 2).unwrap(), 0.0);
        // matching point replaced by a mismatching one
        assert_eq!(loo(&order, &labels, 1, 0, 2).unwrap(), 0.5);
        // mismatching point replaced by a mismatching one
        assert_eq!(loo(&order, &[1, 0, 1, 0], 0, 0, 2).unwrap(), 0.0);
        assert!(loo(&order_of(2), &labels, 0, 0, 2).is_err());
    }
}
