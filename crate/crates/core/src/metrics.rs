//! DCG/NDCG with exponential gains, the |ΔNDCG|-weighted pairwise logistic
//! surrogate cost, and baseline cost rescaling.

use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Execution, Result};

pub const DEFAULT_TRUNCATION: usize = 10;
pub const DEFAULT_SIGMA: f64 = 1.0;

#[inline]
pub fn gain(grade: u32) -> f64 {
    (grade as f64).exp2() - 1.0
}

/// Discount for a 0-based position; zero past the truncation depth.
#[inline]
fn discount(position: usize, k: usize) -> f64 {
    if position < k {
        1.0 / ((position + 2) as f64).log2()
    } else {
        0.0
    }
}

/// Σ over the first `k` ranks of `(2^grade - 1) / log2(rank + 1)`.
pub fn dcg_at_k(grades: &[u32], order: &[usize], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &doc)| gain(grades[doc]) * discount(pos, k))
        .sum()
}

/// Document indices by descending score, ties by ascending index.
pub fn ranking_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn ideal_dcg(grades: &[u32], k: usize) -> f64 {
    let mut sorted = grades.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &g)| gain(g) * discount(pos, k))
        .sum()
}

/// NDCG@k of the score ordering. A query with no positive grade scores 1.
pub fn ndcg_at_k(grades: &[u32], scores: &[f64], k: usize) -> f64 {
    debug_assert_eq!(grades.len(), scores.len());
    let ideal = ideal_dcg(grades, k);
    if ideal == 0.0 {
        return 1.0;
    }
    dcg_at_k(grades, &ranking_order(scores), k) / ideal
}

/// Current positions of one query's documents plus the NDCG normalizer,
/// from which swap deltas are read.
pub(crate) struct QueryRanking {
    positions: Vec<usize>,
    inv_ideal: f64,
    k: usize,
}

impl QueryRanking {
    pub(crate) fn new(grades: &[u32], scores: &[f64], k: usize) -> Self {
        let order = ranking_order(scores);
        let mut positions = vec![0; order.len()];
        for (pos, &doc) in order.iter().enumerate() {
            positions[doc] = pos;
        }
        let ideal = ideal_dcg(grades, k);
        QueryRanking {
            positions,
            inv_ideal: if ideal > 0.0 { 1.0 / ideal } else { 0.0 },
            k,
        }
    }

    pub(crate) fn is_inert(&self) -> bool {
        self.inv_ideal == 0.0
    }

    /// |NDCG change| from swapping documents `i` and `j`.
    #[inline]
    pub(crate) fn delta_ndcg(&self, grades: &[u32], i: usize, j: usize) -> f64 {
        let (pi, pj) = (self.positions[i], self.positions[j]);
        if pi >= self.k && pj >= self.k {
            return 0.0;
        }
        ((gain(grades[i]) - gain(grades[j])) * (discount(pi, self.k) - discount(pj, self.k))).abs()
            * self.inv_ideal
    }
}

/// Numerically stable `ln(1 + e^(-x))`.
#[inline]
pub(crate) fn log1p_exp_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Surrogate cost of one query: Σ over pairs with `grade_i > grade_j` of
/// `|ΔNDCG_ij| · ln(1 + exp(-sigma (s_i - s_j)))`.
pub fn surrogate_cost(grades: &[u32], scores: &[f64], k: usize, sigma: f64) -> f64 {
    debug_assert_eq!(grades.len(), scores.len());
    let ranking = QueryRanking::new(grades, scores, k);
    if ranking.is_inert() {
        return 0.0;
    }
    let mut cost = 0.0;
    for i in 0..grades.len() {
        for j in 0..grades.len() {
            if grades[i] > grades[j] {
                let w = ranking.delta_ndcg(grades, i, j);
                if w > 0.0 {
                    cost += w * log1p_exp_neg(sigma * (scores[i] - scores[j]));
                }
            }
        }
    }
    cost
}

/// Mean per-query surrogate cost over a dataset.
pub fn dataset_cost(
    dataset: &Dataset,
    grades: &[u32],
    scores: &[f64],
    k: usize,
    sigma: f64,
    exec: Execution,
) -> f64 {
    let per_query = exec.map(dataset.groups(), |g| {
        surrogate_cost(&grades[g.range()], &scores[g.range()], k, sigma)
    });
    per_query.iter().sum::<f64>() / dataset.query_count() as f64
}

/// Mean per-query NDCG@k over a dataset.
pub fn mean_ndcg(dataset: &Dataset, grades: &[u32], scores: &[f64], k: usize, exec: Execution) -> f64 {
    let per_query = exec.map(dataset.groups(), |g| {
        ndcg_at_k(&grades[g.range()], &scores[g.range()], k)
    });
    per_query.iter().sum::<f64>() / dataset.query_count() as f64
}

/// Baseline raw costs `Z^t` per named sub-objective, on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CostScale {
    pub entries: Vec<(String, f64)>,
}

impl CostScale {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, z)| z)
            .ok_or_else(|| Error::UnknownObjective(name.to_string()))
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        let name = name.into();
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::DegenerateScale { name, value });
        }
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((name, value)),
        }
        Ok(())
    }
}

/// `raw / scale`, so the baseline model sits at exactly 1.0.
pub fn rescaled_cost(raw: f64, scale: f64) -> Result<f64> {
    if scale <= 0.0 || scale.is_nan() {
        return Err(Error::DegenerateScale {
            name: String::new(),
            value: scale,
        });
    }
    Ok(raw / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dcg_examples() {
        assert_eq!(dcg_at_k(&[3], &[0], 10), 7.0);
        assert_eq!(dcg_at_k(&[], &[], 10), 0.0);
        // 7 + 3 / log2(3), evaluated independently.
        assert_abs_diff_eq!(dcg_at_k(&[3, 2], &[0, 1], 10), 8.892789260714373, epsilon = 1e-12);
        assert_eq!(dcg_at_k(&[3, 2], &[0, 1], 1), 7.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[3, 2, 0], &[3.0, 2.0, 1.0], 10), 1.0);
        assert_abs_diff_eq!(ndcg_at_k(&[1, 0], &[0.0, 1.0], 10), 0.6309297535714575, epsilon = 1e-12);
        assert_eq!(ndcg_at_k(&[0, 0, 0], &[0.3, -1.0, 2.0], 10), 1.0);
        assert_eq!(ndcg_at_k(&[], &[], 10), 1.0);
    }

    #[test]
    fn tied_scores_rank_by_index() {
        assert_eq!(ranking_order(&[1.0, 2.0, 1.0, 2.0]), vec![1, 3, 0, 2]);
        assert_eq!(ndcg_at_k(&[1, 0], &[0.0, 0.0], 10), 1.0);
        assert!(ndcg_at_k(&[0, 1], &[0.0, 0.0], 10) < 1.0);
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_cost(&[2, 2, 2], &[0.1, 0.5, -1.0], 10, 1.0), 0.0);
        // |ΔNDCG| = 1 - 1/log2(3), times ln 2.
        assert_abs_diff_eq!(surrogate_cost(&[1, 0], &[0.0, 0.0], 10, 1.0), 0.2558200007405084, epsilon = 1e-12);
        // Normalized by IDCG = 7, the swap delta matches the binary case.
        let w = 1.0 - 1.0 / 3f64.log2();
        assert_abs_diff_eq!(
            surrogate_cost(&[3, 0], &[0.0, 0.0], 10, 1.0),
            w * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn log1p_exp_is_stable() {
        assert_abs_diff_eq!(log1p_exp_neg(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(log1p_exp_neg(800.0) >= 0.0);
        assert_abs_diff_eq!(log1p_exp_neg(-800.0), 800.0, epsilon = 1e-9);
    }

    #[test]
    fn rescaling() {
        assert_eq!(rescaled_cost(0.5, 0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(rescaled_cost(0.45, 0.5).unwrap(), 0.9, epsilon = 1e-15);
        assert_eq!(rescaled_cost(0.0, 0.5).unwrap(), 0.0);
        assert!(rescaled_cost(0.3, 0.0).is_err());
        assert!(rescaled_cost(0.3, -1.0).is_err());
        let mut scale = CostScale::default();
        assert!(scale.insert("q", 0.0).is_err());
        scale.insert("q", 0.25).unwrap();
        assert_eq!(scale.get("q").unwrap(), 0.25);
        assert!(scale.get("z").is_err());
    }

    fn query() -> impl Strategy<Value = (Vec<u32>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..5, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ndcg_in_unit_interval((grades, scores) in query(), k in 1usize..12) {
            let v = ndcg_at_k(&grades, &scores, k);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn ndcg_invariant_under_increasing_maps((grades, scores) in query(), k in 1usize..12, a in 0.1f64..4.0, b in -3.0f64..3.0) {
            let mapped: Vec<f64> = scores.iter().map(|&s| a * s.tanh() * 2.0 + b).collect();
            let base: Vec<f64> = scores.iter().map(|&s| s.tanh()).collect();
            prop_assert_eq!(ndcg_at_k(&grades, &base, k), ndcg_at_k(&grades, &mapped, k));
        }

        #[test]
        fn grade_monotone_scores_are_perfect(grades in prop::collection::vec(0u32..5, 1..12), k in 1usize..12) {
            let scores: Vec<f64> = grades.iter().enumerate().map(|(i, &g)| g as f64 * 10.0 - i as f64 * 1e-3).collect();
            prop_assert!((ndcg_at_k(&grades, &scores, k) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cost_non_negative((grades, scores) in query(), k in 1usize..12) {
            prop_assert!(surrogate_cost(&grades, &scores, k, 1.0) >= 0.0);
        }

        #[test]
        fn widening_a_discordant_gap_lowers_cost(low in -2.0f64..0.0, gap in 0.01f64..2.0) {
            // doc 0 has the higher grade but the lower score; other docs far below.
            let grades = [3, 1, 0, 0];
            let base = [low, low + gap, -20.0, -21.0];
            let mut wider = base;
            wider[0] += gap * 0.25;
            let c0 = surrogate_cost(&grades, &base, 10, 1.0);
            let c1 = surrogate_cost(&grades, &wider, 10, 1.0);
            prop_assert!(c1 < c0, "{c1} !< {c0}");
        }
    }
}
