//! On-disk run descriptions: the manifest written next to every training run
//! and the grid specification read by `quatkg grid`.

use std::path::{Path, PathBuf};

use quatkg::train::TrainConfig;
use quatkg::{Dataset, Metrics, ScoreVariant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        DatasetSummary {
            entities: ds.num_entities(),
            relations: ds.num_relations(),
            train: ds.train.len(),
            valid: ds.valid.len(),
            test: ds.test.len(),
        }
    }
}

/// Both-sides metrics of the selected model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub valid: Option<Metrics>,
    pub test: Option<Metrics>,
}

/// Everything needed to rerun a training job bit-for-bit (given the same
/// dataset files and platform). Relative paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub data: PathBuf,
    pub variant: ScoreVariant,
    pub seed: u64,
    pub config: TrainConfig,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub param_count: usize,
    pub best_epoch: usize,
    pub dataset: DatasetSummary,
    pub metrics: MetricSummary,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((manifest, base))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTarget {
    pub split: quatkg::Split,
    pub mrr: f64,
    #[serde(default)]
    pub hits10: Option<f64>,
    pub mrr_tolerance: f64,
}

/// Cartesian grid over learning rate, negatives, dimension and L2 rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_variant")]
    pub variant: ScoreVariant,
    pub lr: Vec<f64>,
    pub neg: Vec<usize>,
    pub dim: Vec<usize>,
    pub lambda: Vec<f64>,
    pub epochs: usize,
    pub eval_every: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub target: Option<GridTarget>,
}

fn default_variant() -> ScoreVariant {
    ScoreVariant::QuatRE
}

fn default_batches() -> usize {
    100
}

impl GridSpec {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
    }

    /// Cells in lr-major order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &lr in &self.lr {
            for &neg in &self.neg {
                for &dim in &self.dim {
                    for &lambda in &self.lambda {
                        out.push(GridCell {
                            lr,
                            neg,
                            dim,
                            lambda,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub neg: usize,
    pub dim: usize,
    pub lambda: f64,
}

impl GridCell {
    pub fn dir_name(&self, index: usize) -> String {
        format!(
            "cell{index:03}-lr{}-neg{}-dim{}-lambda{}",
            self.lr, self.neg, self.dim, self.lambda
        )
    }
}
