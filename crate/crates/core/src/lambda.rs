//! LambdaMART gradients and hessians of the surrogate cost.
//!
//! Sign convention: `gradients` hold ∂cost/∂s, the quantity being minimized.
//! Trees fit the Newton step `-G / H`, i.e. they move scores against the
//! gradient. |ΔNDCG| weights are read from the current ordering and treated
//! as constants.

use crate::metrics::QueryRanking;
use crate::{Dataset, Error, Execution, Result};

/// Per-document gradient and hessian for one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPair {
    pub gradients: Vec<f64>,
    pub hessians: Vec<f64>,
}

impl LambdaPair {
    pub fn zeros(n: usize) -> Self {
        LambdaPair {
            gradients: vec![0.0; n],
            hessians: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.gradients.iter_mut().for_each(|g| *g *= factor);
        self.hessians.iter_mut().for_each(|h| *h *= factor);
    }

    /// `self += coef * other`.
    pub fn add_scaled(&mut self, coef: f64, other: &LambdaPair) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "lambda pair",
                expected: self.len(),
                actual: other.len(),
            });
        }
        for (g, o) in self.gradients.iter_mut().zip(&other.gradients) {
            *g += coef * o;
        }
        for (h, o) in self.hessians.iter_mut().zip(&other.hessians) {
            *h += coef * o;
        }
        Ok(())
    }
}

/// Gradient and hessian of one query's surrogate cost (not divided by the
/// query count).
pub fn query_lambdas(grades: &[u32], scores: &[f64], k: usize, sigma: f64) -> LambdaPair {
    let n = grades.len();
    let mut out = LambdaPair::zeros(n);
    let ranking = QueryRanking::new(grades, scores, k);
    if ranking.is_inert() {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            if grades[i] <= grades[j] {
                continue;
            }
            let w = ranking.delta_ndcg(grades, i, j);
            if w == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lambda = sigma * w * rho;
            let hess = sigma * sigma * w * rho * (1.0 - rho);
            out.gradients[i] -= lambda;
            out.gradients[j] += lambda;
            out.hessians[i] += hess;
            out.hessians[j] += hess;
        }
    }
    out
}

/// Lambdas of the mean-over-queries surrogate cost for one objective.
pub fn objective_lambdas(
    dataset: &Dataset,
    grades: &[u32],
    scores: &[f64],
    k: usize,
    sigma: f64,
    exec: Execution,
) -> LambdaPair {
    let per_query = exec.map(dataset.groups(), |g| {
        query_lambdas(&grades[g.range()], &scores[g.range()], k, sigma)
    });
    let inv_queries = 1.0 / dataset.query_count() as f64;
    let mut out = LambdaPair {
        gradients: Vec::with_capacity(dataset.len()),
        hessians: Vec::with_capacity(dataset.len()),
    };
    for q in per_query {
        out.gradients.extend(q.gradients.iter().map(|g| g * inv_queries));
        out.hessians.extend(q.hessians.iter().map(|h| h * inv_queries));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::surrogate_cost;
    use crate::Document;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_grades_give_zero() {
        let l = query_lambdas(&[1, 1, 1], &[0.3, 0.1, -0.2], 10, 1.0);
        assert!(l.gradients.iter().chain(&l.hessians).all(|&x| x == 0.0));
    }

    #[test]
    fn single_tied_pair_splits_lambda_evenly() {
        let w = 1.0 - 1.0 / 3f64.log2();
        let l = query_lambdas(&[1, 0], &[0.0, 0.0], 10, 1.0);
        assert_abs_diff_eq!(l.gradients[0], -w / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.gradients[1], w / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.hessians[0], w / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn discordant_pair_pushes_better_doc_up() {
        let l = query_lambdas(&[2, 0], &[-1.0, 1.0], 10, 1.0);
        assert!(l.gradients[0] < 0.0 && l.gradients[1] > 0.0);
    }

    /// Central differences of the single-query cost, valid while the step
    /// keeps the ordering (and hence |ΔNDCG|) unchanged.
    fn finite_difference(grades: &[u32], scores: &[f64], doc: usize, step: f64) -> f64 {
        let mut up = scores.to_vec();
        let mut down = scores.to_vec();
        up[doc] += step;
        down[doc] -= step;
        (surrogate_cost(grades, &up, 10, 1.0) - surrogate_cost(grades, &down, 10, 1.0)) / (2.0 * step)
    }

    #[test]
    fn matches_finite_differences_on_random_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grades: Vec<u32> = (0..20).map(|_| rng.random_range(0..5)).collect();
        let scores: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let l = query_lambdas(&grades, &scores, 10, 1.0);
        for doc in 0..20 {
            let fd = finite_difference(&grades, &scores, doc, 1e-5);
            if l.gradients[doc].abs() > 1e-8 {
                let rel = (fd - l.gradients[doc]).abs() / l.gradients[doc].abs();
                assert!(rel < 1e-4, "doc {doc}: fd {fd} vs {}", l.gradients[doc]);
            } else {
                assert!(fd.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dataset_lambdas_divide_by_query_count() {
        let docs = [(1, "a"), (0, "a"), (1, "b"), (0, "b")]
            .iter()
            .map(|&(l, q)| Document {
                features: vec![0.0],
                primary_label: l,
                query_id: q.into(),
            })
            .collect();
        let ds = Dataset::from_documents(docs).unwrap();
        let grades = ds.primary_labels().to_vec();
        let scores = vec![0.0; 4];
        let seq = objective_lambdas(&ds, &grades, &scores, 10, 1.0, Execution::Sequential);
        let single = query_lambdas(&grades[..2], &scores[..2], 10, 1.0);
        assert_eq!(seq.gradients[0], single.gradients[0] / 2.0);
        let par = objective_lambdas(&ds, &grades, &scores, 10, 1.0, Execution::Parallel);
        assert_eq!(seq, par);
    }

    fn query() -> impl Strategy<Value = (Vec<u32>, Vec<f64>)> {
        (2usize..15).prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..5, n),
                prop::collection::vec(-4.0f64..4.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn lambdas_sum_to_zero_and_hessians_non_negative((grades, scores) in query(), k in 1usize..15) {
            let l = query_lambdas(&grades, &scores, k, 1.0);
            prop_assert!(l.gradients.iter().sum::<f64>().abs() < 1e-9);
            prop_assert!(l.hessians.iter().all(|&h| h >= 0.0));
        }
    }
}
