//! Query-grouped ranking data and per-objective grade labels.

mod labels;
mod letor;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use labels::{
    derive_objective_labels, Direction, GradeBinning, LabelSource, Objective, ObjectiveSet,
    ObjectiveSpec, DEFAULT_GRADES,
};
pub use letor::{parse_letor, parse_letor_str, read_letor_file, write_letor};

/// One input row before it is placed into a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub features: Vec<f64>,
    pub primary_label: u32,
    pub query_id: String,
}

/// A contiguous run of documents sharing one query id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub query_id: String,
    pub start: usize,
    pub end: usize,
}

impl QueryGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Documents stored row-major, grouped by query, with one grade vector per
/// named objective. Immutable once labeled; share it read-only across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_count: usize,
    features: Vec<f64>,
    labels: Vec<u32>,
    groups: Vec<QueryGroup>,
    objective_labels: BTreeMap<String, Vec<u32>>,
}

impl Dataset {
    /// Builds a dataset from rows. Rows sharing a query id are gathered into
    /// one group; groups keep the order of first appearance and rows keep
    /// their relative input order within a group.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Dataset("no documents".into()));
        }
        let feature_count = documents.iter().map(|d| d.features.len()).max().unwrap_or(0);

        let mut order: Vec<String> = Vec::new();
        let mut members: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            members
                .entry(doc.query_id.clone())
                .or_insert_with(|| {
                    order.push(doc.query_id.clone());
                    Vec::new()
                })
                .push(i);
        }

        let mut slots: Vec<Option<Document>> = documents.into_iter().map(Some).collect();
        let mut features = Vec::with_capacity(slots.len() * feature_count);
        let mut labels = Vec::with_capacity(slots.len());
        let mut groups = Vec::with_capacity(order.len());
        for qid in order {
            let start = labels.len();
            for &i in &members[&qid] {
                let doc = slots[i].take().expect("each row is placed once");
                features.extend_from_slice(&doc.features);
                features.extend(std::iter::repeat_n(0.0, feature_count - doc.features.len()));
                labels.push(doc.primary_label);
            }
            groups.push(QueryGroup {
                query_id: qid,
                start,
                end: labels.len(),
            });
        }

        Ok(Dataset {
            feature_count,
            features,
            labels,
            groups,
            objective_labels: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn features(&self, doc: usize) -> &[f64] {
        let start = doc * self.feature_count;
        &self.features[start..start + self.feature_count]
    }

    /// Row-major feature matrix, `len() * feature_count()` values.
    pub fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    /// Values of one feature column (0-based index).
    pub fn column(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        self.features
            .iter()
            .skip(index)
            .step_by(self.feature_count.max(1))
            .copied()
    }

    pub fn primary_labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn max_grade(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn query_count(&self) -> usize {
        self.groups.len()
    }

    pub fn query_id(&self, doc: usize) -> &str {
        let g = self.groups.partition_point(|g| g.end <= doc);
        &self.groups[g].query_id
    }

    pub fn document(&self, doc: usize) -> Document {
        Document {
            features: self.features(doc).to_vec(),
            primary_label: self.labels[doc],
            query_id: self.query_id(doc).to_string(),
        }
    }

    /// Grades of a named objective.
    pub fn labels(&self, objective: &str) -> Result<&[u32]> {
        self.objective_labels
            .get(objective)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownObjective(objective.to_string()))
    }

    pub fn objective_names(&self) -> impl Iterator<Item = &str> {
        self.objective_labels.keys().map(String::as_str)
    }

    pub fn set_objective_labels(&mut self, objective: &str, grades: Vec<u32>) -> Result<()> {
        if grades.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "objective grades",
                expected: self.len(),
                actual: grades.len(),
            });
        }
        self.objective_labels.insert(objective.to_string(), grades);
        Ok(())
    }

    /// Pads every row with zero features up to `feature_count`.
    pub fn widen(&mut self, feature_count: usize) -> Result<()> {
        if feature_count < self.feature_count {
            return Err(Error::Dataset(format!(
                "cannot shrink {} features to {feature_count}",
                self.feature_count
            )));
        }
        if feature_count == self.feature_count {
            return Ok(());
        }
        let mut features = Vec::with_capacity(self.len() * feature_count);
        for doc in 0..self.len() {
            features.extend_from_slice(self.features(doc));
            features.extend(std::iter::repeat_n(0.0, feature_count - self.feature_count));
        }
        self.features = features;
        self.feature_count = feature_count;
        Ok(())
    }

    /// New dataset holding the selected query groups in the given order.
    pub fn select_groups(&self, group_indices: &[usize]) -> Dataset {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::with_capacity(group_indices.len());
        let mut objective_labels: BTreeMap<String, Vec<u32>> = self
            .objective_labels
            .keys()
            .map(|k| (k.clone(), Vec::new()))
            .collect();
        for &gi in group_indices {
            let g = &self.groups[gi];
            let start = labels.len();
            features.extend_from_slice(
                &self.features[g.start * self.feature_count..g.end * self.feature_count],
            );
            labels.extend_from_slice(&self.labels[g.range()]);
            for (name, grades) in objective_labels.iter_mut() {
                grades.extend_from_slice(&self.objective_labels[name][g.range()]);
            }
            groups.push(QueryGroup {
                query_id: g.query_id.clone(),
                start,
                end: labels.len(),
            });
        }
        Dataset {
            feature_count: self.feature_count,
            features,
            labels,
            groups,
            objective_labels,
        }
    }
}

/// Splits at query granularity. `fraction` of the groups (rounded, but
/// leaving at least one group on each side) go to the first dataset.
/// Groups keep their original relative order inside each half.
pub fn split_train_valid(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n = dataset.query_count();
    if n < 2 {
        return Err(Error::Dataset(format!("cannot split {n} query group(s)")));
    }
    let train_count = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, valid) = indices.split_at_mut(train_count);
    train.sort_unstable();
    valid.sort_unstable();
    Ok((dataset.select_groups(train), dataset.select_groups(valid)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(qid: &str, label: u32, x: f64) -> Document {
        Document {
            features: vec![x],
            primary_label: label,
            query_id: qid.into(),
        }
    }

    fn groups_of(n: usize) -> Dataset {
        let docs = (0..n)
            .flat_map(|q| (0..3).map(move |d| doc(&format!("q{q}"), d as u32 % 2, (q * 3 + d) as f64)))
            .collect();
        Dataset::from_documents(docs).unwrap()
    }

    #[test]
    fn interleaved_qids_are_gathered() {
        let ds = Dataset::from_documents(vec![
            doc("a", 0, 1.0),
            doc("b", 1, 2.0),
            doc("a", 2, 3.0),
        ])
        .unwrap();
        assert_eq!(ds.query_count(), 2);
        assert_eq!(ds.groups()[0].query_id, "a");
        assert_eq!(ds.groups()[0].range(), 0..2);
        assert_eq!(ds.primary_labels(), &[0, 2, 1]);
        assert_eq!(ds.column(0).collect::<Vec<_>>(), vec![1.0, 3.0, 2.0]);
        assert_eq!(ds.query_id(2), "b");
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let ds = groups_of(10);
        let (a, b) = split_train_valid(&ds, 0.8, 42).unwrap();
        assert_eq!(a.query_count(), 8);
        assert_eq!(b.query_count(), 2);
        for g in b.groups() {
            assert!(a.groups().iter().all(|h| h.query_id != g.query_id));
        }
        let (a2, b2) = split_train_valid(&ds, 0.8, 42).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn split_never_leaves_a_side_empty() {
        let ds = groups_of(3);
        for seed in 0..20 {
            let (a, b) = split_train_valid(&ds, 0.5, seed).unwrap();
            assert!(a.query_count() >= 1 && b.query_count() >= 1);
            assert_eq!(a.query_count() + b.query_count(), 3);
        }
    }

    #[test]
    fn split_errors() {
        assert!(split_train_valid(&groups_of(1), 0.5, 0).is_err());
        assert!(split_train_valid(&groups_of(4), 1.0, 0).is_err());
        assert!(split_train_valid(&groups_of(4), 0.0, 0).is_err());
    }

    #[test]
    fn select_groups_carries_objective_labels() {
        let mut ds = groups_of(3);
        ds.set_objective_labels("x", (0..9).collect()).unwrap();
        let sub = ds.select_groups(&[2, 0]);
        assert_eq!(sub.labels("x").unwrap(), &[6, 7, 8, 0, 1, 2]);
        assert_eq!(sub.groups()[1].range(), 3..6);
        assert!(ds.set_objective_labels("y", vec![0]).is_err());
    }

    #[test]
    fn widen_pads_with_zero() {
        let mut ds = groups_of(1);
        ds.widen(3).unwrap();
        assert_eq!(ds.features(1), &[1.0, 0.0, 0.0]);
        assert!(ds.widen(2).is_err());
    }
}
