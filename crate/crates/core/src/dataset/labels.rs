use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::metrics::DEFAULT_TRUNCATION;
use crate::{Error, Result};

pub const DEFAULT_GRADES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    PrimaryLabel,
    /// 1-based feature id, as written in LETOR files.
    FeatureColumn(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Goodness,
    Badness,
}

/// Declares one objective: where its graded relevance comes from and how
/// NDCG is truncated for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    pub source: LabelSource,
    pub direction: Direction,
    /// Number of quantile grades for feature-derived labels.
    pub grades: u32,
    pub truncation: usize,
}

impl ObjectiveSpec {
    pub fn primary(name: impl Into<String>) -> Self {
        ObjectiveSpec {
            name: name.into(),
            source: LabelSource::PrimaryLabel,
            direction: Direction::Goodness,
            grades: DEFAULT_GRADES,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn feature(name: impl Into<String>, feature_id: usize, direction: Direction) -> Self {
        ObjectiveSpec {
            name: name.into(),
            source: LabelSource::FeatureColumn(feature_id),
            direction,
            grades: DEFAULT_GRADES,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn with_grades(mut self, grades: u32) -> Self {
        self.grades = grades;
        self
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("objective name must not be empty".into()));
        }
        if self.truncation == 0 {
            return Err(Error::Config(format!("{}: NDCG truncation must be > 0", self.name)));
        }
        match self.source {
            LabelSource::PrimaryLabel if self.direction != Direction::Goodness => Err(Error::Config(
                format!("{}: the primary label is always a goodness grade", self.name),
            )),
            LabelSource::FeatureColumn(0) => {
                Err(Error::Config(format!("{}: feature ids start at 1", self.name)))
            }
            LabelSource::FeatureColumn(_) if self.grades < 2 => Err(Error::Config(format!(
                "{}: need at least 2 grades, got {}",
                self.name, self.grades
            ))),
            _ => Ok(()),
        }
    }
}

/// Maps raw feature values to grades with equal-population quantile edges.
///
/// A value gets the number of edges strictly below it, so values tied with
/// an edge fall into the lower grade. Fitted on one split and reused on the
/// others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeBinning {
    /// 0-based column index.
    pub column: usize,
    /// Set for badness columns: values are replaced by `flip_max - v`.
    pub flip_max: Option<f64>,
    pub edges: Vec<f64>,
}

impl GradeBinning {
    pub fn fit(dataset: &Dataset, spec: &ObjectiveSpec) -> Result<Self> {
        spec.validate()?;
        let LabelSource::FeatureColumn(id) = spec.source else {
            return Err(Error::Config(format!(
                "{}: the primary label needs no grading",
                spec.name
            )));
        };
        if id > dataset.feature_count() {
            return Err(Error::FeatureOutOfRange {
                id,
                count: dataset.feature_count(),
            });
        }
        if dataset.is_empty() {
            return Err(Error::Dataset("cannot grade an empty dataset".into()));
        }
        let column = id - 1;

        let raw: Vec<f64> = dataset.column(column).collect();
        let flip_max = match spec.direction {
            Direction::Goodness => None,
            Direction::Badness => Some(raw.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        };
        let mut values: Vec<f64> = raw.iter().map(|&v| flip(v, flip_max)).collect();
        values.sort_by(f64::total_cmp);

        let n = values.len();
        let g = spec.grades as usize;
        let edges = (1..g)
            .map(|b| values[(b * n).div_ceil(g) - 1])
            .collect();
        Ok(GradeBinning {
            column,
            flip_max,
            edges,
        })
    }

    pub fn grade(&self, raw: f64) -> u32 {
        let v = flip(raw, self.flip_max);
        self.edges.partition_point(|&e| e < v) as u32
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Vec<u32>> {
        if self.column >= dataset.feature_count() {
            return Err(Error::FeatureOutOfRange {
                id: self.column + 1,
                count: dataset.feature_count(),
            });
        }
        Ok(dataset.column(self.column).map(|v| self.grade(v)).collect())
    }
}

fn flip(v: f64, flip_max: Option<f64>) -> f64 {
    match flip_max {
        Some(max) => max - v,
        None => v,
    }
}

/// Grades for a feature-derived objective, binned on `dataset` itself.
pub fn derive_objective_labels(dataset: &Dataset, spec: &ObjectiveSpec) -> Result<Vec<u32>> {
    GradeBinning::fit(dataset, spec)?.apply(dataset)
}

/// An objective together with the grade binning fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub spec: ObjectiveSpec,
    pub binning: Option<GradeBinning>,
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn truncation(&self) -> usize {
        self.spec.truncation
    }

    pub fn grades_for(&self, dataset: &Dataset) -> Result<Vec<u32>> {
        match &self.binning {
            Some(binning) => binning.apply(dataset),
            None => Ok(dataset.primary_labels().to_vec()),
        }
    }
}

/// The primary objective plus every declared sub-objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSet {
    pub primary: Objective,
    pub subs: Vec<Objective>,
}

impl ObjectiveSet {
    /// Validates the declarations and fits sub-objective binnings on `train`.
    pub fn fit(primary: ObjectiveSpec, subs: Vec<ObjectiveSpec>, train: &Dataset) -> Result<Self> {
        primary.validate()?;
        if primary.source != LabelSource::PrimaryLabel {
            return Err(Error::Config(format!(
                "primary objective {} must use the primary label",
                primary.name
            )));
        }
        let mut names = vec![primary.name.as_str()];
        for spec in &subs {
            if spec.source == LabelSource::PrimaryLabel {
                return Err(Error::Config(format!(
                    "exactly one objective may use the primary label ({} and {})",
                    primary.name, spec.name
                )));
            }
            if names.contains(&spec.name.as_str()) {
                return Err(Error::Config(format!("duplicate objective name {}", spec.name)));
            }
            names.push(&spec.name);
        }
        let subs = subs
            .into_iter()
            .map(|spec| {
                let binning = GradeBinning::fit(train, &spec)?;
                Ok(Objective {
                    spec,
                    binning: Some(binning),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ObjectiveSet {
            primary: Objective {
                spec: primary,
                binning: None,
            },
            subs,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Objective> {
        std::iter::once(&self.primary).chain(self.subs.iter())
    }

    pub fn sub(&self, name: &str) -> Result<&Objective> {
        self.subs
            .iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::UnknownObjective(name.to_string()))
    }

    /// Attaches grades for every objective to `dataset`.
    pub fn label(&self, dataset: &mut Dataset) -> Result<()> {
        for objective in self.iter() {
            let grades = objective.grades_for(dataset)?;
            dataset.set_objective_labels(objective.name(), grades)?;
        }
        Ok(())
    }
}
