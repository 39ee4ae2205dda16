//! Sorted-neighbor retrieval.
//!
//! [`NeighborIndex`] is a kd-tree over the training points. Every query
//! returns neighbors in the canonical order: ascending distance, ties broken
//! by ascending training index. The result for any horizon is therefore a
//! prefix of the exhaustive ordering.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{squared_euclidean, DistanceMetric};

/// Neighborhood size used when none is requested explicitly.
pub const DEFAULT_HORIZON: usize = 100;

const LEAF_SIZE: usize = 16;

/// Training indices sorted by distance to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborOrder {
    pub ranked: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborOrder {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// 0-based rank of training point `idx`, if it is within the horizon.
    pub fn position_of(&self, idx: usize) -> Option<usize> {
        self.ranked.iter().position(|&r| r == idx)
    }

    /// Labels of the ranked points, in rank order.
    pub fn labels_in_order(&self, labels: &[u32]) -> Vec<u32> {
        self.ranked.iter().map(|&i| labels[i]).collect()
    }

    pub fn truncated(&self, horizon: usize) -> NeighborOrder {
        let h = horizon.min(self.len());
        NeighborOrder {
            ranked: self.ranked[..h].to_vec(),
            distances: self.distances[..h].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable kd-tree over a dataset's points.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    metric: DistanceMetric,
    dim: usize,
    labels: Vec<u32>,
    /// Embedded points, reordered so that every leaf is contiguous.
    points: Vec<f64>,
    /// `perm[s]` is the training index stored at slot `s`.
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn build(dataset: &Dataset, metric: DistanceMetric) -> Result<Self> {
        let dim = dataset.dim();
        let n = dataset.len();
        let mut embedded = Vec::with_capacity(n * dim);
        for i in 0..n {
            let e = metric.embed(dataset.point(i)).ok_or_else(|| {
                Error::Validation(format!("point {i} is a zero vector; cosine metric undefined"))
            })?;
            embedded.extend_from_slice(&e);
        }

        let mut perm: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(&embedded, dim, &mut perm, 0, n, &mut nodes);

        let mut points = Vec::with_capacity(n * dim);
        for &i in &perm {
            points.extend_from_slice(&embedded[i * dim..(i + 1) * dim]);
        }
        Ok(NeighborIndex {
            metric,
            dim,
            labels: dataset.labels().to_vec(),
            points,
            perm,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// The `horizon` nearest training points to `query` in canonical order.
    /// A horizon larger than the dataset is clamped.
    pub fn query_sorted(&self, query: &[f64], horizon: usize) -> Result<NeighborOrder> {
        if horizon == 0 {
            return Err(Error::Argument("horizon must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        let q = self.metric.embed(query).ok_or_else(|| {
            Error::Argument("cosine metric is undefined for a zero query vector".into())
        })?;
        let horizon = horizon.min(self.len());

        let mut found = if horizon * 4 >= self.len() {
            self.scan_all(&q)
        } else {
            let mut heap = BinaryHeap::with_capacity(horizon + 1);
            self.search(0, &q, horizon, &mut heap);
            heap.into_vec()
        };
        found.sort_unstable();
        found.truncate(horizon);
        Ok(NeighborOrder {
            ranked: found.iter().map(|c| c.idx).collect(),
            distances: found.iter().map(|c| c.dist).collect(),
        })
    }

    /// Neighbors of training point `i` with `i` itself placed first.
    pub fn query_self(&self, dataset: &Dataset, i: usize, horizon: usize) -> Result<NeighborOrder> {
        if i >= self.len() {
            return Err(Error::Argument(format!("point {i} outside index of {}", self.len())));
        }
        let mut order = self.query_sorted(dataset.point(i), horizon)?;
        match order.position_of(i) {
            Some(0) => {}
            Some(p) => {
                order.ranked.remove(p);
                order.distances.remove(p);
                order.ranked.insert(0, i);
                order.distances.insert(0, 0.0);
            }
            None => {
                order.ranked.insert(0, i);
                order.distances.insert(0, 0.0);
                order.ranked.pop();
                order.distances.pop();
            }
        }
        Ok(order)
    }

    fn slot_point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    fn scan_all(&self, q: &[f64]) -> Vec<Candidate> {
        (0..self.len())
            .map(|s| Candidate {
                dist: self.metric.distance_from_squared(squared_euclidean(q, self.slot_point(s))),
                idx: self.perm[s],
            })
            .collect()
    }

    fn search(&self, node: usize, q: &[f64], horizon: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for s in start..end {
                    let cand = Candidate {
                        dist: self.metric.distance_from_squared(squared_euclidean(q, self.slot_point(s))),
                        idx: self.perm[s],
                    };
                    if heap.len() < horizon {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, horizon, heap);
                // Every point across the plane is at least |diff| away along
                // `axis`, and the computed distance is monotone in that term.
                let bound = self.metric.distance_from_squared(diff * diff);
                if heap.len() < horizon || bound <= heap.peek().unwrap().dist {
                    self.search(far, q, horizon, heap);
                }
            }
        }
    }
}

fn build_node(
    points: &[f64],
    dim: usize,
    perm: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let coord = |i: usize, a: usize| points[i * dim + a];

    let axis = (0..dim)
        .map(|a| {
            let (lo, hi) = perm[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = coord(i, a);
                (lo.min(v), hi.max(v))
            });
            (a, hi - lo)
        })
        .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
        .map(|(a, _)| a)
        .unwrap_or(0);

    let mid = start + (end - start) / 2;
    perm[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
        coord(x, axis).total_cmp(&coord(y, axis)).then(x.cmp(&y))
    });
    let value = coord(perm[mid], axis);

    nodes.push(Node::Leaf { start, end });
    let left = build_node(points, dim, perm, start, mid, nodes);
    let right = build_node(points, dim, perm, mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

/// Exhaustive canonical ordering, used as a reference for the tree search.
pub fn brute_force_order(
    dataset: &Dataset,
    metric: DistanceMetric,
    query: &[f64],
    horizon: usize,
) -> Result<NeighborOrder> {
    let mut cands = (0..dataset.len())
        .map(|i| {
            metric
                .distance(query, dataset.point(i))
                .map(|dist| Candidate { dist, idx: i })
        })
        .collect::<Result<Vec<_>>>()?;
    cands.sort_unstable();
    cands.truncate(horizon.min(dataset.len()));
    Ok(NeighborOrder {
        ranked: cands.iter().map(|c| c.idx).collect(),
        distances: cands.iter().map(|c| c.dist).collect(),
    })
}
