//! The single JSON document that fully describes a run.

use std::path::{Path, PathBuf};

use cpsnn::{ModelHyperparams, ModelKind, TaskConfig, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Independent training runs; repeat `r` uses seed `training.seed + r`.
    pub repeats: usize,
    pub hyper: ModelHyperparams,
    pub training: TrainingConfig,
    pub task: TaskConfig,
    pub outputs: OutputPaths,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub metrics: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Cpsnn,
            repeats: 3,
            hyper: ModelHyperparams::default(),
            training: TrainingConfig::default(),
            task: TaskConfig::default(),
            outputs: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats must be at least 1".into()));
        }
        self.hyper.validate()?;
        self.training.validate()?;
        Ok(())
    }
}
