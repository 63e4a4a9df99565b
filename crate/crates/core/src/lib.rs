//! Multi-objective learning-to-rank with gradient-boosted trees.
//!
//! A primary NDCG objective is minimized subject to upper bounds on the
//! surrogate costs of any number of sub-objectives. Constraints are handled
//! with an Augmented Lagrangian: the dual multipliers are refreshed once per
//! boosting round and the booster fits the combined LambdaMART gradients.
//!
//! The crate is organized bottom-up:
//!
//! - [`dataset`]: LETOR parsing, query grouping, per-objective grade labels.
//! - [`metrics`]: DCG/NDCG, the pairwise surrogate cost, cost rescaling.
//! - [`lambda`]: first and second derivatives of the surrogate cost.
//! - [`lagrangian`]: dual state, Lagrangian value, dual update.
//! - [`gbdt`]: histogram regression trees and the boosting loop.
//! - [`pipeline`]: baseline, upper-bound sweeps, full model, linear weighting.

pub mod dataset;
mod error;
pub mod exec;
pub mod gbdt;
pub mod lagrangian;
pub mod lambda;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;

pub use dataset::{
    derive_objective_labels, parse_letor, parse_letor_str, read_letor_file, split_train_valid,
    write_letor, Dataset, Direction, Document, GradeBinning, LabelSource, Objective,
    ObjectiveSet, ObjectiveSpec, QueryGroup,
};
pub use error::{Error, ParseError, Result};
pub use exec::Execution;
pub use gbdt::{fit_tree, predict, train, BoosterModel, Guidance, LinearWeights, TrainConfig, TrainOutcome, Tree};
pub use lagrangian::{ALState, Constraint, History, RoundRecord};
pub use lambda::{objective_lambdas, LambdaPair};
pub use metrics::{dcg_at_k, ndcg_at_k, rescaled_cost, surrogate_cost, CostScale};
