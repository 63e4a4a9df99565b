use crate::{Dataset, Execution};

pub const DEFAULT_MAX_BINS: usize = 256;

/// Per-feature split thresholds. A value `v` lands in bin
/// `#{t : t < v}`, so splitting after bin `b` sends exactly the values
/// `v <= thresholds[b]` left, matching the raw-value routing rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBins {
    thresholds: Vec<Vec<f64>>,
}

impl FeatureBins {
    pub fn fit(dataset: &Dataset, max_bins: usize, exec: Execution) -> Self {
        let thresholds = exec.map_range(dataset.feature_count(), |f| {
            column_thresholds(dataset.column(f).collect(), max_bins)
        });
        FeatureBins { thresholds }
    }

    pub fn feature_count(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.thresholds[feature]
    }

    pub fn bin_count(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn bin_of(&self, feature: usize, value: f64) -> u8 {
        self.thresholds[feature].partition_point(|&t| t < value) as u8
    }
}

/// Thresholds lie between consecutive distinct values. With more distinct
/// values than bins, cuts are placed at equal-population positions.
fn column_thresholds(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in values.iter().copied() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }

    let n = values.len();
    let mut thresholds = Vec::with_capacity(max_bins - 1);
    let mut cumulative = 0usize;
    let mut cut = 1usize;
    for i in 0..distinct.len() - 1 {
        cumulative += distinct[i].1;
        // Cut once this value fills the current equal-population slot.
        if cumulative * max_bins >= cut * n {
            thresholds.push(midpoint(distinct[i].0, distinct[i + 1].0));
            while cut < max_bins && cumulative * max_bins >= cut * n {
                cut += 1;
            }
            if thresholds.len() == max_bins - 1 {
                break;
            }
        }
    }
    thresholds
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid > a && mid < b {
        mid
    } else {
        // Adjacent floats: keep `a` so it still routes left.
        a
    }
}

/// Column-major bin indices for every document, fitted once per training run.
#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    pub bins: FeatureBins,
    columns: Vec<Vec<u8>>,
    rows: usize,
}

impl BinnedFeatures {
    pub fn new(dataset: &Dataset, max_bins: usize, exec: Execution) -> Self {
        let bins = FeatureBins::fit(dataset, max_bins, exec);
        let columns = exec.map_range(dataset.feature_count(), |f| {
            dataset.column(f).map(|v| bins.bin_of(f, v)).collect()
        });
        BinnedFeatures {
            bins,
            columns,
            rows: dataset.len(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: usize) -> &[u8] {
        &self.columns[feature]
    }
}
