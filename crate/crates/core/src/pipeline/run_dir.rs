//! Run directory layout:
//!
//! ```text
//! <root>/build_log.csv
//! <root>/baseline/{model,history.csv,report.csv,config}
//! <root>/sweeps/<objective>/<ub>/{model,history.csv,report.csv,config}
//! <root>/full/{model,history.csv,report.csv,config}
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::GainReport;
use crate::{Error, Result, TrainOutcome};

pub const BUILD_LOG: &str = "build_log.csv";
pub const BUILD_LOG_HEADER: &str = "build,stage,objective,bound,trees,path";

/// One row of `build_log.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildEntry {
    pub build: usize,
    pub stage: String,
    pub objective: String,
    pub bound: String,
    pub trees: usize,
    pub path: String,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::file(&root, e))?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    /// Writes the four stage files and appends a build-log row.
    #[allow(clippy::too_many_arguments)]
    pub fn write_stage<C: Serialize>(
        &self,
        relative: &str,
        stage: &str,
        objective: &str,
        bound: &str,
        outcome: &TrainOutcome,
        reports: &[&GainReport],
        config: &C,
    ) -> Result<()> {
        let dir = self.path(relative);
        fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
        outcome.model.save(dir.join("model"))?;
        write_file(&dir.join("history.csv"), &outcome.history.to_csv_string(outcome.terms()))?;
        write_file(&dir.join("report.csv"), &GainReport::csv_of(reports))?;
        let mut config = serde_json::to_string_pretty(config)?;
        config.push('\n');
        write_file(&dir.join("config"), &config)?;
        self.log_build(stage, objective, bound, outcome.model.trees.len(), relative)
    }

    pub fn log_build(&self, stage: &str, objective: &str, bound: &str, trees: usize, relative: &str) -> Result<()> {
        let path = self.path(BUILD_LOG);
        let build = match fs::read_to_string(&path) {
            Ok(text) => text.lines().count().saturating_sub(1) + 1,
            Err(_) => 1,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::file(&path, e))?;
        let mut line = String::new();
        if build == 1 {
            line.push_str(BUILD_LOG_HEADER);
            line.push('\n');
        }
        line.push_str(&format!("{build},{stage},{objective},{bound},{trees},{relative}\n"));
        file.write_all(line.as_bytes()).map_err(|e| Error::file(&path, e))
    }

    pub fn read_build_log(&self) -> Result<Vec<BuildEntry>> {
        read_build_log(&self.path(BUILD_LOG))
    }
}

pub fn read_build_log(path: &Path) -> Result<Vec<BuildEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Dataset(format!("malformed build log row {line:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(BuildEntry {
                build: f[0].parse().map_err(|_| bad())?,
                stage: f[1].into(),
                objective: f[2].into(),
                bound: f[3].into(),
                trees: f[4].parse().map_err(|_| bad())?,
                path: f[5].into(),
            })
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::file(path, e))
}
