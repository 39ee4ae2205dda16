//! Seeded synthetic datasets.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Two interleaved unit half-circles.
    TwoMoons,
    /// Two isotropic Gaussian blobs centred at (-1, 0) and (1, 0).
    GaussianBlobs,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moons" | "moons" => Ok(SyntheticKind::TwoMoons),
            "gaussian-blobs" | "blobs" => Ok(SyntheticKind::GaussianBlobs),
            other => Err(Error::Argument(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub minority_fraction: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<Dataset> {
        generate_synthetic(self.kind, self.n, self.minority_fraction, self.noise, self.seed)
    }
}

/// Generates `n` labeled 2-d points; class 1 receives
/// `round(minority_fraction * n)` of them.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    minority_fraction: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::Argument(format!("synthetic datasets need n >= 4, got {n}")));
    }
    if !(minority_fraction > 0.0 && minority_fraction <= 0.5) {
        return Err(Error::Argument(format!(
            "minority fraction must lie in (0, 0.5], got {minority_fraction}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Argument(format!("noise must be finite and >= 0, got {noise}")));
    }

    let n_minority = (minority_fraction * n as f64).round() as usize;
    let n_majority = n - n_minority;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points: Vec<([f64; 2], i64)> = Vec::with_capacity(n);
    match kind {
        SyntheticKind::TwoMoons => {
            for (class, count) in [(0i64, n_majority), (1, n_minority)] {
                for s in 0..count {
                    let t = if count > 1 {
                        PI * s as f64 / (count - 1) as f64
                    } else {
                        PI / 2.0
                    };
                    let p = if class == 0 {
                        [t.cos(), t.sin()]
                    } else {
                        [1.0 - t.cos(), 0.5 - t.sin()]
                    };
                    points.push((p, class));
                }
            }
        }
        SyntheticKind::GaussianBlobs => {
            for (class, count, cx) in [(0i64, n_majority, -1.0), (1, n_minority, 1.0)] {
                for _ in 0..count {
                    points.push(([cx, 0.0], class));
                }
            }
        }
    }

    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("noise validated above");
        for (p, _) in points.iter_mut() {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    points.shuffle(&mut rng);

    let labels = points.iter().map(|(_, c)| *c).collect();
    let features = points.iter().flat_map(|(p, _)| *p).collect();
    Dataset::from_flat(features, 2, labels)
}
