//! Histogram regression trees fitted on (gradient, hessian) targets and the
//! boosting loop that interleaves them with the dual updates.

mod bins;
mod booster;
mod train;
mod tree;

use serde::{Deserialize, Serialize};

use crate::{Error, Execution, Result};

pub use bins::{BinnedFeatures, FeatureBins, DEFAULT_MAX_BINS};
pub use booster::{predict, BoosterModel, GuidanceSummary, ModelMeta, MODEL_FORMAT_VERSION};
pub use train::{train, Guidance, LinearWeights, TrainOutcome, ValidationRecord};
pub use tree::{fit_tree, Node, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_docs_per_leaf: usize,
    /// Added to every hessian sum in gains and leaf values.
    pub l2_reg: f64,
    pub sigma: f64,
    pub max_bins: usize,
    /// Recorded with the model. Tree fitting uses every row and feature, so
    /// no random numbers are drawn during training.
    pub seed: u64,
    /// Does not affect results; not persisted.
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_trees: 300,
            learning_rate: 0.1,
            max_leaves: 31,
            min_docs_per_leaf: 20,
            l2_reg: 1.0,
            sigma: 1.0,
            max_bins: DEFAULT_MAX_BINS,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_trees == 0 {
            return fail("num_trees must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail(format!("learning rate {} not in (0, 1]", self.learning_rate));
        }
        if self.max_leaves < 2 {
            return fail(format!("max_leaves must be at least 2, got {}", self.max_leaves));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return fail(format!("l2_reg must be >= 0, got {}", self.l2_reg));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(2..=DEFAULT_MAX_BINS).contains(&self.max_bins) {
            return fail(format!("max_bins must be in 2..=256, got {}", self.max_bins));
        }
        Ok(())
    }
}
