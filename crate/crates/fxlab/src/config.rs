//! Pipeline configuration, read from a JSON file.
//!
//! Relative paths in the file are resolved against the file's directory.
//! Every block except the two CSV paths is optional:
//!
//! ```json
//! {
//!   "usa_csv": "usa.csv",
//!   "ind_csv": "ind.csv",
//!   "target": "forex",
//!   "train_fraction": 0.9,
//!   "models": ["var", "svr", "lstm"],
//!   "stationarity": "auto_difference",
//!   "output_dir": "out",
//!   "seed": 7,
//!   "var": { "max_lag": 6, "lag": null },
//!   "svr": { "c": 1000, "gamma": 0.001, "epsilon": 0.1,
//!            "grid": { "c": [10, 1000], "gamma": [0.001, 0.1], "folds": 3 } },
//!   "lstm": { "hidden_dim": 16, "learning_rate": 0.1, "epochs": 3000 },
//!   "importance": { "trees": 200, "max_depth": 6 }
//! }
//! ```

use std::path::{Path, PathBuf};

use fxlab_core::lstm::OutputPeephole;
use fxlab_core::svr::SvrConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Var,
    Svr,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Var => "var",
            ModelKind::Svr => "svr",
            ModelKind::Lstm => "lstm",
        }
    }
}

/// What to do with series that have a unit root in levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityPolicy {
    /// Difference every series once; warn about any that still fail.
    #[default]
    AutoDifference,
    /// Refuse to fit unless every series is stationary in levels.
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarSettings {
    /// Upper bound for AIC lag selection.
    pub max_lag: usize,
    /// Fixed lag order; skips AIC selection when set.
    pub lag: Option<usize>,
}

impl Default for VarSettings {
    fn default() -> Self {
        Self { max_lag: 6, lag: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Defaults to the single `epsilon` of the enclosing block.
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrSettings {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub grid: Option<SvrGrid>,
}

impl Default for SvrSettings {
    fn default() -> Self {
        let d = SvrConfig::default();
        Self {
            c: d.c,
            gamma: d.gamma,
            epsilon: d.epsilon,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            grid: None,
        }
    }
}

impl SvrSettings {
    pub fn config(&self) -> SvrConfig {
        SvrConfig {
            c: self.c,
            gamma: self.gamma,
            epsilon: self.epsilon,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    /// Cartesian product of the grid axes, `C` outermost.
    pub fn grid_configs(&self) -> Option<Vec<SvrConfig>> {
        let grid = self.grid.as_ref()?;
        let eps = grid.epsilon.clone().unwrap_or_else(|| vec![self.epsilon]);
        let mut out = Vec::new();
        for &c in &grid.c {
            for &gamma in &grid.gamma {
                for &epsilon in &eps {
                    out.push(SvrConfig {
                        c,
                        gamma,
                        epsilon,
                        ..self.config()
                    });
                }
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSettings {
    pub hidden_dim: usize,
    /// Plain gradient descent is slow on the panel; the defaults trade a few
    /// seconds of training for reliable convergence.
    pub learning_rate: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub patience: usize,
    /// Share of the training rows, taken from the end, used for early stopping.
    pub validation_fraction: f64,
    pub output_peephole: OutputPeephole,
}

impl Default for LstmSettings {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            learning_rate: 0.1,
            epochs: 3000,
            clip_norm: 5.0,
            patience: 500,
            validation_fraction: 0.1,
            output_peephole: OutputPeephole::Previous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceSettings {
    pub trees: usize,
    pub max_depth: usize,
}

impl Default for ImportanceSettings {
    fn default() -> Self {
        Self {
            trees: 200,
            max_depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub usa_csv: PathBuf,
    pub ind_csv: PathBuf,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub stationarity: StationarityPolicy,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub var: VarSettings,
    #[serde(default)]
    pub svr: SvrSettings,
    #[serde(default)]
    pub lstm: LstmSettings,
    #[serde(default)]
    pub importance: ImportanceSettings,
}

fn default_target() -> String {
    "forex".to_string()
}

fn default_train_fraction() -> f64 {
    0.9
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Var, ModelKind::Svr, ModelKind::Lstm]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("fxlab-out")
}

impl PipelineConfig {
    /// Minimal configuration with defaults for everything but the inputs.
    pub fn new(usa_csv: impl Into<PathBuf>, ind_csv: impl Into<PathBuf>) -> Self {
        Self {
            usa_csv: usa_csv.into(),
            ind_csv: ind_csv.into(),
            target: default_target(),
            train_fraction: default_train_fraction(),
            models: default_models(),
            stationarity: StationarityPolicy::default(),
            output_dir: default_output_dir(),
            seed: None,
            var: VarSettings::default(),
            svr: SvrSettings::default(),
            lstm: LstmSettings::default(),
            importance: ImportanceSettings::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.usa_csv, &mut config.ind_csv, &mut config.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Structural checks; model hyperparameters are validated by the model
    /// code when it runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.models.is_empty() {
            return bad("at least one model must be selected".to_string());
        }
        if self.target.is_empty() {
            return bad("target column name is empty".to_string());
        }
        Ok(())
    }

    /// Models in a fixed order without duplicates.
    pub fn selected_models(&self) -> Vec<ModelKind> {
        let mut models = self.models.clone();
        models.sort();
        models.dedup();
        models
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults_and_resolved_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"usa_csv": "a.csv", "ind_csv": "/abs/b.csv"}"#).unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.usa_csv, dir.path().join("a.csv"));
        assert_eq!(c.ind_csv, PathBuf::from("/abs/b.csv"));
        assert_eq!(c.train_fraction, 0.9);
        assert_eq!(c.selected_models(), default_models());
        assert_eq!(c.lstm.hidden_dim, 16);
        assert_eq!(c.svr.c, 1000.0);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"usa_csv": "a", "ind_csv": "b", "lstm": {"epoch": 3}}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_is_cartesian() {
        let s = SvrSettings {
            grid: Some(SvrGrid {
                c: vec![1.0, 10.0],
                gamma: vec![0.1, 0.2, 0.3],
                epsilon: None,
                folds: 3,
            }),
            ..SvrSettings::default()
        };
        let g = s.grid_configs().unwrap();
        assert_eq!(g.len(), 6);
        assert!(g.iter().all(|c| c.epsilon == s.epsilon));
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::new("a", "b");
        assert!(c.validate().is_ok());
        c.train_fraction = 1.0;
        assert!(c.validate().is_err());
        c.train_fraction = 0.5;
        c.models.clear();
        assert!(c.validate().is_err());
    }
}
