//! Seeded synthetic ranking data where a feature-defined sub-objective
//! conflicts with relevance.
//!
//! Every document has `features` standard-normal features. Relevance grades
//! come from a noisy linear score in features 1, 2 and 5. Two sub-objectives
//! pull against it: [`QUALITY_FEATURE`] (goodness) is anti-correlated with
//! feature 1, and [`STALENESS_FEATURE`] (badness) is correlated with
//! feature 2, so ranking fresh documents first also costs relevance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Dataset, Direction, Document, ObjectiveSpec, Result};

/// 1-based id of the feature that defines the sub-objective.
pub const QUALITY_FEATURE: usize = 3;
/// 1-based id of the badness feature behind the second sub-objective.
pub const STALENESS_FEATURE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub queries: usize,
    pub docs_per_query: usize,
    pub features: usize,
    /// Magnitude of the correlation between each sub-objective feature and
    /// the relevance feature it opposes.
    pub conflict: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            queries: 200,
            docs_per_query: 20,
            features: 8,
            conflict: 0.6,
            noise: 0.5,
            seed: 20190513,
        }
    }
}

const GRADE_CUTS: [f64; 4] = [-0.5, 0.3, 1.0, 1.7];

pub fn generate(config: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let c = config.conflict.clamp(-1.0, 1.0);
    let mut docs = Vec::with_capacity(config.queries * config.docs_per_query);
    for q in 0..config.queries {
        for _ in 0..config.docs_per_query {
            let mut x: Vec<f64> = (0..config.features.max(5)).map(|_| normal()).collect();
            let rest = (1.0 - c * c).sqrt();
            x[QUALITY_FEATURE - 1] = -c * x[0] + rest * x[QUALITY_FEATURE - 1];
            x[STALENESS_FEATURE - 1] = c * x[1] + rest * x[STALENESS_FEATURE - 1];
            let latent = x[0] + 0.6 * x[1] + 0.3 * x[4] + config.noise * normal();
            let grade = GRADE_CUTS.iter().filter(|&&cut| latent >= cut).count() as u32;
            docs.push(Document {
                features: x,
                primary_label: grade,
                query_id: format!("{}", q + 1),
            });
        }
    }
    Dataset::from_documents(docs)
}

/// Train / validation / test datasets from consecutive seeds, with the
/// validation and test sets half the size of the training set.
pub fn fixture_splits(config: &SyntheticConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let train = generate(config)?;
    let held_out = |offset: u64| {
        generate(&SyntheticConfig {
            queries: (config.queries / 2).max(2),
            seed: config.seed + offset,
            ..config.clone()
        })
    };
    Ok((train, held_out(1)?, held_out(2)?))
}

pub fn fixture_objectives() -> (ObjectiveSpec, Vec<ObjectiveSpec>) {
    (
        ObjectiveSpec::primary("rel"),
        vec![
            ObjectiveSpec::feature("quality", QUALITY_FEATURE, Direction::Goodness),
            ObjectiveSpec::feature("freshness", STALENESS_FEATURE, Direction::Badness),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig {
            queries: 10,
            ..SyntheticConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.query_count(), 10);
        assert_eq!(a.feature_count(), 8);
        assert!(a.max_grade() <= 4);
        assert_eq!(a, generate(&cfg).unwrap());
    }
}
