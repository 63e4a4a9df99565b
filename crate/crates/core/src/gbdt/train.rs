use log::{debug, warn};

use super::{fit_tree, BinnedFeatures, BoosterModel, GuidanceSummary, ModelMeta, TrainConfig};
use crate::lagrangian::{weighted_lambdas, History, RoundRecord};
use crate::metrics::{dataset_cost, mean_ndcg};
use crate::{objective_lambdas, ALState, Constraint, CostScale, Dataset, Error, ObjectiveSet, Result};

/// Fixed convex combination `w_pm C_pm + Σ_t w_t C̃_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWeights {
    pub primary: f64,
    pub subs: Vec<(String, f64)>,
    pub scales: CostScale,
}

impl LinearWeights {
    /// Weights must be non-negative and not all zero; they are normalized to
    /// sum to one (with a warning when they did not already).
    pub fn new(primary: f64, subs: Vec<(String, f64)>, scales: CostScale) -> Result<Self> {
        let all = std::iter::once(primary).chain(subs.iter().map(|(_, w)| *w));
        if all.clone().any(|w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("linear weights must be finite and non-negative".into()));
        }
        let total: f64 = all.sum();
        if total == 0.0 {
            return Err(Error::Config("linear weights are all zero".into()));
        }
        let mut weights = LinearWeights {
            primary,
            subs,
            scales,
        };
        if (total - 1.0).abs() > 1e-12 {
            warn!("linear weights sum to {total}; normalizing");
            weights.primary /= total;
            weights.subs.iter_mut().for_each(|(_, w)| *w /= total);
        }
        for (name, _) in &weights.subs {
            weights.scales.get(name)?;
        }
        Ok(weights)
    }
}

pub enum Guidance {
    Augmented(ALState),
    Linear(LinearWeights),
}

impl Guidance {
    pub fn unconstrained() -> Self {
        Guidance::Augmented(ALState::unconstrained())
    }
}

/// Per-round validation NDCG, primary first then every sub-objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub iteration: usize,
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BoosterModel,
    /// Dual state after the last round (`None` for linear weighting).
    pub state: Option<ALState>,
    pub history: History,
    pub train_scores: Vec<f64>,
    pub validation: Vec<ValidationRecord>,
}

impl TrainOutcome {
    /// Number of constrained (or weighted) sub-objectives.
    pub fn terms(&self) -> usize {
        self.history.last().map_or(0, |r| r.sub_costs.len())
    }
}

struct Term<'a> {
    grades: &'a [u32],
    truncation: usize,
    inv_scale: f64,
}

/// Boosting loop. Each round computes lambdas at the current scores,
/// combines them with the current multipliers (or fixed weights), fits one
/// tree, refreshes the scores, measures the rescaled training costs and
/// runs the dual update.
pub fn train(
    data: &Dataset,
    valid: Option<&Dataset>,
    objectives: &ObjectiveSet,
    guidance: Guidance,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if let Some(v) = valid {
        if v.feature_count() != data.feature_count() {
            return Err(Error::LengthMismatch {
                what: "validation feature count",
                expected: data.feature_count(),
                actual: v.feature_count(),
            });
        }
    }
    let exec = config.execution;
    let sigma = config.sigma;
    let mut guidance = guidance;

    let (summary, term_names, scales): (GuidanceSummary, Vec<String>, Vec<f64>) = match &guidance {
        Guidance::Augmented(state) if state.is_empty() => (GuidanceSummary::Unconstrained, vec![], vec![]),
        Guidance::Augmented(state) => {
            let mut scales = CostScale::default();
            for (name, &z) in state.objectives.iter().zip(&state.scales) {
                scales.insert(name.clone(), z)?;
            }
            let constraints = state
                .objectives
                .iter()
                .zip(&state.bounds)
                .map(|(name, &b)| Constraint::new(name.clone(), b))
                .collect();
            (
                GuidanceSummary::Augmented {
                    mu: state.mu,
                    constraints,
                    scales,
                },
                state.objectives.clone(),
                state.scales.clone(),
            )
        }
        Guidance::Linear(w) => (
            GuidanceSummary::Linear {
                primary_weight: w.primary,
                weights: w.subs.clone(),
                scales: w.scales.clone(),
            },
            w.subs.iter().map(|(n, _)| n.clone()).collect(),
            w.subs
                .iter()
                .map(|(n, _)| w.scales.get(n))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let terms = term_names
        .iter()
        .zip(&scales)
        .map(|(name, &scale)| {
            Ok(Term {
                grades: data.labels(name)?,
                truncation: objectives.sub(name)?.truncation(),
                inv_scale: 1.0 / scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let primary_grades = data.labels(objectives.primary.name())?;
    let primary_k = objectives.primary.truncation();

    let valid_grades = match valid {
        Some(v) => Some(
            objectives
                .iter()
                .map(|o| Ok((v.labels(o.name())?, o.truncation())))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    let binned = BinnedFeatures::new(data, config.max_bins, exec);
    let mut model = BoosterModel {
        feature_count: data.feature_count(),
        learning_rate: config.learning_rate,
        trees: Vec::with_capacity(config.num_trees),
        meta: ModelMeta::new(objectives.clone(), summary, config.clone()),
    };
    let mut scores = vec![0.0; data.len()];
    let mut valid_scores = valid.map(|v| vec![0.0; v.len()]);
    let mut history = History::default();
    let mut validation = Vec::new();

    for round in 1..=config.num_trees {
        let (primary_weight, coefficients): (f64, Vec<f64>) = match &guidance {
            Guidance::Augmented(state) => (1.0, state.alpha.clone()),
            Guidance::Linear(w) => (w.primary, w.subs.iter().map(|(_, w)| *w).collect()),
        };

        let primal = objective_lambdas(data, primary_grades, &scores, primary_k, sigma, exec);
        let mut active = Vec::new();
        let mut active_coefficients = Vec::new();
        for (term, &coef) in terms.iter().zip(&coefficients) {
            if coef != 0.0 {
                let mut l = objective_lambdas(data, term.grades, &scores, term.truncation, sigma, exec);
                l.scale(term.inv_scale);
                active.push(l);
                active_coefficients.push(coef);
            }
        }
        let combined = weighted_lambdas(primary_weight, &primal, &active, &active_coefficients)?;

        let tree = fit_tree(&binned, &combined.gradients, &combined.hessians, config)?;
        let outputs = exec.map_range(data.len(), |i| tree.predict(data.features(i)));
        for (s, out) in scores.iter_mut().zip(&outputs) {
            *s += config.learning_rate * out;
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore { round });
        }
        if let (Some(v), Some(vs)) = (valid, valid_scores.as_mut()) {
            let outputs = exec.map_range(v.len(), |i| tree.predict(v.features(i)));
            for (s, out) in vs.iter_mut().zip(&outputs) {
                *s += config.learning_rate * out;
            }
        }
        model.trees.push(tree);

        let primary_cost = dataset_cost(data, primary_grades, &scores, primary_k, sigma, exec);
        let sub_costs: Vec<f64> = terms
            .iter()
            .map(|t| dataset_cost(data, t.grades, &scores, t.truncation, sigma, exec) * t.inv_scale)
            .collect();
        match &mut guidance {
            Guidance::Augmented(state) => {
                state.dual_update(primary_cost, &sub_costs)?;
            }
            Guidance::Linear(_) => history.push(RoundRecord {
                iteration: round,
                multipliers: coefficients,
                primary_cost,
                sub_costs,
            }),
        }

        if let (Some(v), Some(vs), Some(vg)) = (valid, valid_scores.as_ref(), valid_grades.as_ref()) {
            validation.push(ValidationRecord {
                iteration: round,
                ndcg: vg.iter().map(|(g, k)| mean_ndcg(v, g, vs, *k, exec)).collect(),
            });
        }
        if round % 50 == 0 {
            debug!("round {round}: primary cost {primary_cost}");
        }
    }

    let state = match guidance {
        Guidance::Augmented(state) => {
            history = state.history.clone();
            Some(state)
        }
        Guidance::Linear(_) => None,
    };
    Ok(TrainOutcome {
        model,
        state,
        history,
        train_scores: scores,
        validation,
    })
}
