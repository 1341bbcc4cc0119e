//! Learning-to-rank methods for uplift modeling.
//!
//! Instances carry a binary treatment flag and a binary response. Models
//! produce scores; [`eval`] turns a ranking into uplift or Qini curves and
//! their areas, [`metrics`] holds classic ranking measures, and
//! [`lambdamart`] trains boosted trees directly on a ranking metric.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gbrt;
pub mod ingest;
pub mod lambdamart;
pub mod letor;
pub mod metrics;
pub mod model;
pub mod relevance;
pub mod simulation;

pub use data::{
    rank_by_scores, split_train_test, Category, Group, Partition, RankedDataset, UpliftDataset,
    UpliftInstance,
};
pub use error::{Error, Result};
pub use eval::{auuc, build_curve, AuucResult, CountMode, CurveFamily, CurvePoint, ValueFunctionSpec};
pub use gbrt::{BoostedEnsemble, GbrtConfig, Loss};
pub use metrics::{Query, RankMetric};
pub use relevance::RelevanceScheme;
