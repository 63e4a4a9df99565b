use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::mean_ndcg;
use crate::{predict, BoosterModel, Dataset, Error, Execution, Result};

/// `100 * (candidate - baseline) / baseline`; exactly 0 when equal.
pub fn percent_gain(candidate: f64, baseline: f64) -> f64 {
    if candidate == baseline {
        0.0
    } else if baseline == 0.0 {
        f64::INFINITY.copysign(candidate)
    } else {
        100.0 * (candidate - baseline) / baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub objective: String,
    pub candidate_ndcg: f64,
    pub baseline_ndcg: f64,
    pub gain_pct: f64,
}

/// Per-objective NDCG@K of a candidate and a baseline on one split, primary
/// objective first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub split: String,
    pub rows: Vec<GainRow>,
}

pub const REPORT_CSV_HEADER: &str = "split,objective,ndcg_candidate,ndcg_baseline,gain_pct";

impl GainReport {
    pub fn row(&self, objective: &str) -> Option<&GainRow> {
        self.rows.iter().find(|r| r.objective == objective)
    }

    pub fn primary_gain(&self) -> f64 {
        self.rows[0].gain_pct
    }

    pub fn sub_gains(&self) -> impl Iterator<Item = &GainRow> {
        self.rows.iter().skip(1)
    }

    /// Data rows without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.split, r.objective, r.candidate_ndcg, r.baseline_ndcg, r.gain_pct
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}", self.csv_rows())
    }

    /// Several reports as one CSV.
    pub fn csv_of(reports: &[&GainReport]) -> String {
        let mut out = format!("{REPORT_CSV_HEADER}\n");
        for r in reports {
            out.push_str(&r.csv_rows());
        }
        out
    }

    /// %-gain table: one row per model, one column per objective.
    pub fn table(models: &[(&str, &GainReport)]) -> String {
        let Some((_, first)) = models.first() else {
            return String::new();
        };
        let mut out = String::new();
        write!(out, "{:<10}", "Model").unwrap();
        for r in &first.rows {
            write!(out, " | {:>9}", r.objective).unwrap();
        }
        out.push('\n');
        for (label, report) in models {
            write!(out, "{label:<10}").unwrap();
            for r in &report.rows {
                write!(out, " | {:>9.2}", r.gain_pct).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Scores both models on `dataset` and reports NDCG and %-gain for every
/// objective the models were trained with.
pub fn report_gains(
    candidate: &BoosterModel,
    baseline: &BoosterModel,
    dataset: &Dataset,
    split: &str,
    exec: Execution,
) -> Result<GainReport> {
    let objectives = &candidate.meta.objectives;
    if *objectives != baseline.meta.objectives {
        return Err(Error::Config(
            "candidate and baseline were trained with different objective declarations".into(),
        ));
    }
    let width = dataset.feature_count();
    let mut padded;
    let ds = if width < candidate.feature_count {
        padded = dataset.clone();
        padded.widen(candidate.feature_count)?;
        &padded
    } else {
        dataset
    };
    let cand_scores = predict(candidate, ds.feature_matrix(), ds.feature_count(), exec)?;
    let base_scores = predict(baseline, ds.feature_matrix(), ds.feature_count(), exec)?;

    let rows = objectives
        .iter()
        .map(|o| {
            let grades = o.grades_for(ds)?;
            let k = o.truncation();
            let candidate_ndcg = mean_ndcg(ds, &grades, &cand_scores, k, exec);
            let baseline_ndcg = mean_ndcg(ds, &grades, &base_scores, k, exec);
            Ok(GainRow {
                objective: o.name().to_string(),
                candidate_ndcg,
                baseline_ndcg,
                gain_pct: percent_gain(candidate_ndcg, baseline_ndcg),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainReport {
        split: split.to_string(),
        rows,
    })
}
