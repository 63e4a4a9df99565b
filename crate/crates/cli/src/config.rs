//! Run configuration: a TOML file merged with command-line overrides.
//!
//! ```toml
//! mode = "full"
//!
//! [data]
//! train = "train.txt"
//! valid = "vali.txt"      # optional; otherwise split off the training file
//! test = "test.txt"       # optional
//! out = "runs/demo"
//!
//! [[objective]]
//! name = "rel"
//! source = "label"
//!
//! [[objective]]
//! name = "quality"
//! source = "feature"
//! feature = 3
//! direction = "goodness"
//!
//! [al]
//! mu = 10.0
//! grid = [0.9, 0.8, 0.7, 0.6, 0.5]
//! goal = -1.0
//! margin = 0.5
//! bounds = { quality = 0.7 }
//!
//! [train]
//! num_trees = 300
//! learning_rate = 0.1
//!
//! [lw]
//! samples = 50
//! seed = 7
//! ```
//!
//! Relative data paths are resolved against the directory holding the
//! config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use alrank::pipeline::{PipelineConfig, DEFAULT_GOAL, DEFAULT_GRID, DEFAULT_MARGIN};
use alrank::{Constraint, Direction, ObjectiveSpec, TrainConfig};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

/// A problem with the configuration or command line (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Sweep,
    Full,
    Lw,
    Evaluate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Sweep => "sweep",
            Mode::Full => "full",
            Mode::Lw => "lw",
            Mode::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub data: DataConfig,
    #[serde(default, rename = "objective")]
    pub objectives: Vec<ObjectiveDecl>,
    #[serde(default)]
    pub al: AlConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub lw: LwConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Share of training queries kept for training when no validation file
    /// is given; the rest become the validation split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Label,
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Goodness,
    Badness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDecl {
    pub name: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default = "default_direction")]
    pub direction: DirectionName,
    #[serde(default = "default_grades")]
    pub grades: u32,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
}

fn default_direction() -> DirectionName {
    DirectionName::Goodness
}

fn default_grades() -> u32 {
    alrank::dataset::DEFAULT_GRADES
}

fn default_truncation() -> usize {
    alrank::metrics::DEFAULT_TRUNCATION
}

impl ObjectiveDecl {
    fn to_spec(&self) -> anyhow::Result<ObjectiveSpec> {
        let spec = match (self.source, self.feature) {
            (Source::Label, None) => ObjectiveSpec::primary(&self.name),
            (Source::Label, Some(_)) => {
                return Err(usage(format!(
                    "objective {:?}: `feature` is only valid with source = \"feature\"",
                    self.name
                )))
            }
            (Source::Feature, Some(id)) => {
                let direction = match self.direction {
                    DirectionName::Goodness => Direction::Goodness,
                    DirectionName::Badness => Direction::Badness,
                };
                ObjectiveSpec::feature(&self.name, id, direction)
            }
            (Source::Feature, None) => {
                return Err(usage(format!("objective {:?}: missing feature id", self.name)))
            }
        };
        Ok(spec.with_grades(self.grades).with_truncation(self.truncation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlConfig {
    pub mu: f64,
    pub grid: Vec<f64>,
    pub goal: f64,
    pub margin: f64,
    pub bounds: BTreeMap<String, f64>,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            mu: alrank::lagrangian::DEFAULT_MU,
            grid: DEFAULT_GRID.to_vec(),
            goal: DEFAULT_GOAL,
            margin: DEFAULT_MARGIN,
            bounds: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LwConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for LwConfig {
    fn default() -> Self {
        LwConfig { samples: 50, seed: 7 }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub mu: Option<f64>,
    pub bounds: Vec<(String, f64)>,
    pub grid: Option<Vec<f64>>,
    pub goal: Option<f64>,
    pub margin: Option<f64>,
    pub trees: Option<usize>,
    pub learning_rate: Option<f64>,
    pub leaves: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        toml::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))
    }

    /// Reads a config file and resolves its relative data paths.
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut config = RunConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.data.train);
        config.data.valid.as_mut().map(resolve);
        config.data.test.as_mut().map(resolve);
        config.data.out.as_mut().map(resolve);
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        if o.mode.is_some() {
            self.mode = o.mode;
        }
        if let Some(mu) = o.mu {
            self.al.mu = mu;
        }
        for (name, bound) in o.bounds {
            self.al.bounds.insert(name, bound);
        }
        if let Some(grid) = o.grid {
            self.al.grid = grid;
        }
        if let Some(goal) = o.goal {
            self.al.goal = goal;
        }
        if let Some(margin) = o.margin {
            self.al.margin = margin;
        }
        if let Some(trees) = o.trees {
            self.train.num_trees = trees;
        }
        if let Some(lr) = o.learning_rate {
            self.train.learning_rate = lr;
        }
        if let Some(leaves) = o.leaves {
            self.train.max_leaves = leaves;
        }
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if o.out.is_some() {
            self.data.out = o.out;
        }
    }

    /// Primary objective and sub-objectives in declaration order.
    pub fn objective_specs(&self) -> anyhow::Result<(ObjectiveSpec, Vec<ObjectiveSpec>)> {
        let primaries = self.objectives.iter().filter(|o| o.source == Source::Label).count();
        if primaries != 1 {
            return Err(usage(format!(
                "exactly one objective must use source = \"label\" (found {primaries})"
            )));
        }
        let mut primary = None;
        let mut subs = Vec::new();
        for decl in &self.objectives {
            let spec = decl.to_spec()?;
            match decl.source {
                Source::Label => primary = Some(spec),
                Source::Feature => subs.push(spec),
            }
        }
        Ok((primary.expect("counted above"), subs))
    }

    /// Bounds for every sub-objective, in declaration order.
    pub fn bounds(&self) -> anyhow::Result<Vec<Constraint>> {
        let (_, subs) = self.objective_specs()?;
        for name in self.al.bounds.keys() {
            if !subs.iter().any(|s| &s.name == name) {
                return Err(usage(format!("bound given for unknown sub-objective {name:?}")));
            }
        }
        let missing: Vec<&str> = subs
            .iter()
            .filter(|s| !self.al.bounds.contains_key(&s.name))
            .map(|s| s.name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(usage(format!(
                "bounds required: none given for {} (set [al] bounds or pass --ub name=value)",
                missing.join(", ")
            )));
        }
        Ok(subs
            .iter()
            .map(|s| Constraint::new(s.name.clone(), self.al.bounds[&s.name]))
            .collect())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            train: self.train.clone(),
            mu: self.al.mu,
            grid: self.al.grid.clone(),
            goal: self.al.goal,
            margin: self.al.margin,
        }
    }

    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        self.data
            .out
            .as_deref()
            .ok_or_else(|| usage("no output directory: set data.out or pass --out"))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Parses `name=value` for `--ub`.
pub fn parse_bound(text: &str) -> Result<(String, f64), String> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {text:?}"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("bound for {name:?} is not a number: {value:?}"))?;
    Ok((name.trim().to_string(), value))
}
