//! Augmented Lagrangian state for `min C_pm(s) s.t. C_t(s) / Z_t <= b_t`.
//!
//! With multipliers `alpha` and the previous iterate `prev_alpha`, the
//! Lagrangian at round k is
//!
//! ```text
//! L_k(s, alpha) = C_pm(s) + Σ_t alpha_t (C̃_t(s) - b_t) - Σ_t (alpha_t - prev_alpha_t)² / (2 mu)
//! ```
//!
//! where `C̃_t = C_t / Z_t` is the cost rescaled by the baseline model's
//! cost. Maximizing over `alpha >= 0` gives the closed-form update
//! `alpha_t <- max(0, mu (C̃_t - b_t) + prev_alpha_t)`, applied once per
//! boosting round. The proximal term does not depend on the scores, so the
//! primal gradient is `λ_pm + Σ_t alpha_t λ̃_t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{CostScale, Error, LambdaPair, Result};

pub const DEFAULT_MU: f64 = 10.0;

/// Upper bound `b_t` on one sub-objective, in rescaled-cost units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub objective: String,
    pub bound: f64,
}

impl Constraint {
    pub fn new(objective: impl Into<String>, bound: f64) -> Self {
        Constraint {
            objective: objective.into(),
            bound,
        }
    }
}

/// One boosting round: the multipliers in force after the round and the
/// training costs that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub iteration: usize,
    pub multipliers: Vec<f64>,
    pub primary_cost: f64,
    /// Rescaled sub-objective costs.
    pub sub_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<RoundRecord>,
}

impl History {
    pub fn push(&mut self, record: RoundRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    /// `iteration,alpha_1..alpha_T,cost_pm,cost_1..cost_T`, one row per round.
    pub fn write_csv<W: Write>(&self, terms: usize, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["iteration".to_string()];
        header.extend((1..=terms).map(|t| format!("alpha_{t}")));
        header.push("cost_pm".into());
        header.extend((1..=terms).map(|t| format!("cost_{t}")));
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string()];
            row.extend(r.multipliers.iter().map(f64::to_string));
            row.push(r.primary_cost.to_string());
            row.extend(r.sub_costs.iter().map(f64::to_string));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, terms: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(terms, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALState {
    pub objectives: Vec<String>,
    pub alpha: Vec<f64>,
    pub prev_alpha: Vec<f64>,
    pub bounds: Vec<f64>,
    pub mu: f64,
    /// Baseline costs `Z_t`, aligned with `objectives`.
    pub scales: Vec<f64>,
    pub history: History,
}

impl ALState {
    /// No constraints: training reduces to plain LambdaMART.
    pub fn unconstrained() -> Self {
        ALState {
            objectives: Vec::new(),
            alpha: Vec::new(),
            prev_alpha: Vec::new(),
            bounds: Vec::new(),
            mu: DEFAULT_MU,
            scales: Vec::new(),
            history: History::default(),
        }
    }

    /// Multipliers start at zero.
    pub fn new(constraints: &[Constraint], mu: f64, scales: &CostScale) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        let mut objectives = Vec::with_capacity(constraints.len());
        let mut bounds = Vec::with_capacity(constraints.len());
        let mut z = Vec::with_capacity(constraints.len());
        for c in constraints {
            if !(c.bound > 0.0 && c.bound.is_finite()) {
                return Err(Error::Config(format!(
                    "bound for {} must be positive, got {}",
                    c.objective, c.bound
                )));
            }
            if objectives.contains(&c.objective) {
                return Err(Error::Config(format!("duplicate constraint on {}", c.objective)));
            }
            let scale = scales.get(&c.objective)?;
            if scale <= 0.0 {
                return Err(Error::DegenerateScale {
                    name: c.objective.clone(),
                    value: scale,
                });
            }
            objectives.push(c.objective.clone());
            bounds.push(c.bound);
            z.push(scale);
        }
        let t = objectives.len();
        Ok(ALState {
            objectives,
            alpha: vec![0.0; t],
            prev_alpha: vec![0.0; t],
            bounds,
            mu,
            scales: z,
            history: History::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    fn check_len(&self, what: &'static str, actual: usize) -> Result<()> {
        if actual != self.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.len(),
                actual,
            });
        }
        Ok(())
    }

    /// Lagrangian value for rescaled sub-objective costs.
    pub fn al_value(&self, primary_cost: f64, sub_costs: &[f64]) -> Result<f64> {
        self.check_len("sub-objective costs", sub_costs.len())?;
        let mut value = primary_cost;
        for ((alpha, cost), bound) in self.alpha.iter().zip(sub_costs).zip(&self.bounds) {
            value += alpha * (cost - bound);
        }
        for (alpha, prev) in self.alpha.iter().zip(&self.prev_alpha) {
            let step = alpha - prev;
            value -= step * step / (2.0 * self.mu);
        }
        Ok(value)
    }

    /// Projected dual ascent step. Appends the round to the history and
    /// returns the new multipliers.
    pub fn dual_update(&mut self, primary_cost: f64, sub_costs: &[f64]) -> Result<&[f64]> {
        self.check_len("sub-objective costs", sub_costs.len())?;
        let next: Vec<f64> = (0..self.len())
            .map(|t| (self.mu * (sub_costs[t] - self.bounds[t]) + self.alpha[t]).max(0.0))
            .collect();
        self.prev_alpha = std::mem::replace(&mut self.alpha, next);
        self.history.push(RoundRecord {
            iteration: self.history.len() + 1,
            multipliers: self.alpha.clone(),
            primary_cost,
            sub_costs: sub_costs.to_vec(),
        });
        Ok(&self.alpha)
    }

    /// Primal gradient of the Lagrangian. `subs` must already be lambdas of
    /// the rescaled costs.
    pub fn combined_lambdas(&self, primal: &LambdaPair, subs: &[LambdaPair]) -> Result<LambdaPair> {
        weighted_lambdas(1.0, primal, subs, &self.alpha)
    }
}

/// `primary_weight * primal + Σ_t weights_t * subs_t`. Zero weights are
/// skipped so an all-zero combination returns `primal` unchanged.
pub fn weighted_lambdas(
    primary_weight: f64,
    primal: &LambdaPair,
    subs: &[LambdaPair],
    weights: &[f64],
) -> Result<LambdaPair> {
    if subs.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "sub-objective lambdas",
            expected: weights.len(),
            actual: subs.len(),
        });
    }
    let mut out = primal.clone();
    if primary_weight != 1.0 {
        out.scale(primary_weight);
    }
    for (w, sub) in weights.iter().zip(subs) {
        if *w != 0.0 {
            out.add_scaled(*w, sub)?;
        }
    }
    Ok(out)
}
