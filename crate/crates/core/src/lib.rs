//! Wasserstein k-NN attribution (WaKA) and membership-inference auditing
//! for k-nearest-neighbor classifiers.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`], [`synth`], [`metric`], [`index`]: data ingestion, seeded
//!   generators, distances, and the kd-tree that yields canonical neighbor
//!   orderings.
//! * [`knn`]: the classifier's discrete loss and majority-vote prediction.
//! * [`attribution`]: exact counting of loss-distribution contributions,
//!   WaKA scores, exact k-NN Shapley values, leave-one-out, and the
//!   contribution store behind removal-influence estimates.
//! * [`oracle`]: exhaustive-enumeration references for small instances.
//! * [`mia`]: security games, attack scorers (t-WaKA, LiRA, confidence),
//!   ROC summaries and per-point attack success rates.
//! * [`experiments`]: data-minimization curves, privacy correlation and
//!   removal ("onion") studies.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod index;
pub mod knn;
pub mod metric;
pub mod mia;
pub mod oracle;
pub mod stats;
pub mod synth;

pub use attribution::{
    AttributionConfig, AttributionReport, ContributionHistogram, ContributionStore, Method, Mode,
    WakaParams,
};
pub use dataset::{DataFormat, Dataset};
pub use error::{Error, Result};
pub use index::{NeighborIndex, NeighborOrder, DEFAULT_HORIZON};
pub use knn::LossSpec;
pub use metric::DistanceMetric;
pub use synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
