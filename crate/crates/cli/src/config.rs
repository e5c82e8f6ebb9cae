//! Run configuration: defaults, optional JSON config file, flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use handshape_core::dataset::GloveFilterConfig;
use handshape_core::descriptor::DescriptorKind;
use handshape_core::eval::Protocol;
use handshape_core::pipeline::PipelineConfig;
use handshape_core::probsom::SomConfig;
use handshape_core::sift::SiftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierChoice {
    Probsom,
    Knn,
}

impl std::str::FromStr for ClassifierChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probsom" => Ok(ClassifierChoice::Probsom),
            "knn" => Ok(ClassifierChoice::Knn),
            other => anyhow::bail!("unknown classifier `{other}` (expected probsom or knn)"),
        }
    }
}

/// Everything a run needs. A JSON file with this shape can be passed via
/// `--config`; individual flags override its values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/model.json`.
    pub model_file: Option<PathBuf>,
    pub descriptor: DescriptorKind,
    pub glove: GloveFilterConfig,
    pub radon_on_mask: bool,
    pub sift: SiftConfig,
    /// SOM settings; `vector_dim` is derived from the descriptor choice.
    pub som: SomOverrides,
    pub protocol: Protocol,
    pub repetitions: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub top_k: usize,
    pub classifier: ClassifierChoice,
    pub knn_neighbors: usize,
    pub jobs: Option<usize>,
    pub debug_stages: bool,
}

/// SOM hyperparameters as stored in config files; anything omitted keeps
/// its default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SomOverrides {
    pub grid_rows: Option<usize>,
    pub grid_cols: Option<usize>,
    pub epochs: Option<usize>,
    pub initial_learning_rate: Option<f64>,
    pub initial_radius: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            output_dir: PathBuf::from("out"),
            model_file: None,
            descriptor: DescriptorKind::RadonLocal,
            glove: GloveFilterConfig::default(),
            radon_on_mask: false,
            sift: SiftConfig::default(),
            som: SomOverrides::default(),
            protocol: Protocol::RandomCv,
            repetitions: 30,
            test_fraction: 0.1,
            seed: 0,
            top_k: 2,
            classifier: ClassifierChoice::Probsom,
            knn_neighbors: 3,
            jobs: None,
            debug_stages: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))
    }

    pub fn som_config(&self) -> SomConfig {
        let mut som = SomConfig::defaults_for_kind(self.descriptor);
        som.seed = self.seed;
        if let Some(v) = self.som.grid_rows {
            som.grid_rows = v;
        }
        if let Some(v) = self.som.grid_cols {
            som.grid_cols = v;
        }
        if let Some(v) = self.som.epochs {
            som.epochs = v;
        }
        if let Some(v) = self.som.initial_learning_rate {
            som.initial_learning_rate = v;
        }
        if let Some(v) = self.som.initial_radius {
            som.initial_radius = v;
        }
        if (self.som.grid_rows.is_some() || self.som.grid_cols.is_some())
            && self.som.initial_radius.is_none() {
                som.initial_radius = som.grid_rows.max(som.grid_cols) as f64 / 2.0;
            }
        som
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            glove: self.glove,
            descriptor: self.descriptor,
            radon_on_mask: self.radon_on_mask,
            sift: self.sift.clone(),
            som: self.som_config(),
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    pub fn canonical_dir(&self) -> PathBuf {
        self.output_dir.join("canonical")
    }

    pub fn canonical_index(&self) -> PathBuf {
        self.canonical_dir().join("canonical.csv")
    }

    pub fn descriptors_path(&self) -> PathBuf {
        self.output_dir.join("descriptors.jsonl")
    }

    pub fn debug_dir(&self) -> PathBuf {
        self.output_dir.join("debug")
    }
}
