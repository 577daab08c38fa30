//! Layered run configuration: an optional TOML file provides defaults,
//! command-line flags override it, and the merged result is echoed into the
//! reproducibility stamp written next to each run's outputs.
//!
//! Path fields can be read from a config file but are never serialized into
//! stamps, so identical runs aimed at different locations produce identical
//! output trees and a stamp can be replayed against fresh paths.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use stmforge_core::degrade::PipelineConfig;

use crate::UsageError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targeted: Option<TargetedSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_toy: Option<TrainToySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restore: Option<RestoreSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sr: Option<SrSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physics_check: Option<PhysicsCheckSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| {
                    UsageError(format!("config {}: {e}", p.display())).into()
                })
            }
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        self.pipeline.clone().unwrap_or_default().to_pipeline()
    }
}

/// Informational header of a stamp file; ignored when a stamp is replayed as
/// a config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunMeta {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta {
            version: String::new(),
            command: String::new(),
            seed: 0,
            config_hash: String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_multi_tip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_misalign: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_blunt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tip_change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_scanline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tip_change_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misalign_sigma: Option<f64>,
}

impl PipelineSection {
    pub fn to_pipeline(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            crop: self.crop.unwrap_or(d.crop),
            p_multi_tip: self.p_multi_tip.unwrap_or(d.p_multi_tip),
            p_misalign: self.p_misalign.unwrap_or(d.p_misalign),
            p_blunt: self.p_blunt.unwrap_or(d.p_blunt),
            p_tip_change: self.p_tip_change.unwrap_or(d.p_tip_change),
            p_scanline: self.p_scanline.unwrap_or(d.p_scanline),
            p_tip_change_offset: self.p_tip_change_offset.unwrap_or(d.p_tip_change_offset),
            misalign_sigma: self.misalign_sigma.unwrap_or(d.misalign_sigma),
        }
    }

    pub fn echo(cfg: &PipelineConfig) -> PipelineSection {
        PipelineSection {
            crop: Some(cfg.crop),
            p_multi_tip: Some(cfg.p_multi_tip),
            p_misalign: Some(cfg.p_misalign),
            p_blunt: Some(cfg.p_blunt),
            p_tip_change: Some(cfg.p_tip_change),
            p_scanline: Some(cfg.p_scanline),
            p_tip_change_offset: Some(cfg.p_tip_change_offset),
            misalign_sigma: Some(cfg.misalign_sigma),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<[usize; 3]>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetedSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degradation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainToySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_per_sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_norm: Option<String>,
    #[serde(skip_serializing)]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestoreSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(skip_serializing)]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(skip_serializing)]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmmd_sigma: Option<f64>,
    #[serde(skip_serializing)]
    pub gt: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub pred: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub embeddings: Option<String>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsCheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(skip_serializing)]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

/// Flag beats config file beats built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Required setting that has no default: must come from a flag or the file.
pub fn pick_required<T>(name: &str, flag: Option<T>, file: Option<T>) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| UsageError(format!("missing required --{name}")).into())
}
