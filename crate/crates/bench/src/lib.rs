//! Shared fixtures for the criterion benchmarks.

use waka::{generate_synthetic, Dataset, DistanceMetric, NeighborIndex, SyntheticKind};

pub fn moons(n: usize, seed: u64) -> Dataset {
    generate_synthetic(SyntheticKind::TwoMoons, n, 0.5, 0.3, seed).expect("valid synthetic spec")
}

pub fn moons_with_index(n: usize, seed: u64) -> (Dataset, NeighborIndex) {
    let ds = moons(n, seed);
    let index = NeighborIndex::build(&ds, DistanceMetric::Euclidean).expect("finite points");
    (ds, index)
}
