//! Experiment configuration files.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use codesign_core::experiment::{Layout, RunSettings, TrainingMode};
use codesign_core::{AnalysisConfig, CollisionConfig, GaConfig, Morphology, PhysicalParams, Protocol, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything needed to reproduce a suite of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub description: String,
    pub layouts: Vec<Layout>,
    #[serde(default = "Morphology::baseline")]
    pub baseline: Morphology,
    #[serde(default = "default_pose")]
    pub initial_pose: [f64; 2],
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub physical: PhysicalParams,
    #[serde(default)]
    pub collision: CollisionConfig,
    #[serde(default = "default_safety_margin")]
    pub safety_margin: f64,
    #[serde(default)]
    pub early_exit_tolerance: Option<f64>,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub protocol: Protocol,
    /// Control-only hidden width; co-design follows the protocol.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_spacing")]
    pub grid_spacing: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub training: TrainingMode,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Default output directory, overridden by `--out` or the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_pose() -> [f64; 2] {
    [FRAC_PI_2, 0.0]
}

fn default_horizon() -> usize {
    300
}

fn default_safety_margin() -> f64 {
    0.02
}

fn default_hidden() -> usize {
    64
}

fn default_spacing() -> f64 {
    0.05
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses and validates a config. Syntax and schema errors carry the
    /// offending key together with its line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layouts.is_empty() {
            bail!("layouts: at least one layout is required");
        }
        let mut names = HashSet::new();
        for l in &self.layouts {
            if l.name.is_empty() || !l.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                bail!("layouts: name {:?} must be non-empty and use only ASCII letters, digits, '_' or '-'", l.name);
            }
            if !names.insert(&l.name) {
                bail!("layouts: duplicate name {:?}", l.name);
            }
        }
        if self.seeds.is_empty() {
            bail!("seeds: at least one seed is required");
        }
        if self.hidden == 0 {
            bail!("hidden: must be >= 1");
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            bail!("grid_spacing: must be finite and > 0, got {}", self.grid_spacing);
        }
        self.ga.validate().context("ga")?;
        self.analysis.validate().context("analysis")?;
        self.baseline.validate().context("baseline")?;
        self.physical.validate().context("physical")?;
        self.collision.validate().map_err(anyhow::Error::msg).context("collision")?;
        Ok(())
    }

    /// Scenario shared by every layout before its obstacles are filled in.
    pub fn template(&self) -> Scenario {
        Scenario {
            obstacles: Vec::new(),
            baseline: self.baseline,
            initial_pose: self.initial_pose,
            horizon: self.horizon,
            physical: self.physical,
            collision: self.collision,
            safety_margin: self.safety_margin,
            early_exit_tolerance: self.early_exit_tolerance,
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            ga: self.ga.clone(),
            protocol: self.protocol,
            hidden: self.hidden,
            seeds: self.seeds.clone(),
            tolerance: self.analysis.tolerance,
            training: self.training,
        }
    }

    pub fn layout(&self, name: &str) -> Option<&Layout> {
        self.layouts.iter().find(|l| l.name == name)
    }

    /// Hex SHA-256 of the canonical JSON form (sorted keys, output directory excluded).
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let value = serde_json::to_value(&canon).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(digest)
    }
}
