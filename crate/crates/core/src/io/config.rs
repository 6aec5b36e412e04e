//! Run configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{MetricId, Modality};
use crate::error::{Error, Result};
use crate::meta::MetaConfig;
use crate::metrics::MetricConfig;
use crate::tinynet::{Architecture, Recipe, TrainConfig};
use crate::xai::XaiConfig;

pub const DEFAULT_OBSERVATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    pub recipe: Recipe,
    /// Training samples for every architecture on this dataset.
    #[serde(default = "default_train_size")]
    pub n_train: usize,
    /// Background samples handed to EG.
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
}

fn default_train_size() -> usize {
    128
}

fn default_pool_size() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    /// The recipe's convolutional (or point-wise) network.
    #[default]
    Default,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub id: String,
    #[serde(default)]
    pub kind: ArchitectureKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
}

fn default_hidden() -> usize {
    16
}

impl ArchitectureSpec {
    pub fn build(&self, recipe: Recipe) -> Architecture {
        let mut arch = match self.kind {
            ArchitectureKind::Default => {
                let mut a = Architecture::default_for(recipe);
                if self.hidden != default_hidden() {
                    let shape = recipe.input_shape();
                    let k = recipe.num_classes();
                    a = match recipe {
                        Recipe::BrightQuadrant => Architecture::image_cnn(shape[0], shape[1], shape[2], k, self.hidden),
                        Recipe::BrightOctant => Architecture::volume_cnn(shape[0], k, self.hidden),
                        Recipe::Primitives => Architecture::point_mlp(shape[0], k, self.hidden),
                    };
                }
                a
            }
            ArchitectureKind::Mlp => Architecture::mlp(recipe.input_shape(), recipe.num_classes(), self.hidden),
        };
        arch.name = self.id.clone();
        arch
    }

    pub fn train_config(&self, recipe: Recipe, seed: u64) -> TrainConfig {
        let mut t = TrainConfig::default_for(recipe, seed);
        if let Some(e) = self.epochs {
            t.epochs = e;
        }
        if let Some(lr) = self.lr {
            t.lr = lr;
        }
        t
    }
}

/// Externally produced artifacts that replace pipeline stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    /// Score manifest; `rank`, `meta` and `report` read it instead of the
    /// `evaluate` output.
    pub scores: Option<PathBuf>,
    /// Saliency-map manifest; `evaluate` reads it instead of the `explain`
    /// output.
    pub maps: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub modality: Modality,
    pub seed: u64,
    #[serde(default = "default_observations")]
    pub n_obs: usize,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub architectures: Vec<ArchitectureSpec>,
    #[serde(default)]
    pub methods: Vec<XaiConfig>,
    /// Metric ids such as `"FC"`; case-insensitive.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub metric_config: MetricConfig,
    #[serde(default)]
    pub meta: MetaConfig,
    #[serde(default)]
    pub ingest: IngestSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_observations() -> usize {
    DEFAULT_OBSERVATIONS
}

fn default_output() -> PathBuf {
    PathBuf::from("salbench-out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative output directory or ingest path is taken
    /// relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.output_dir);
        if let Some(p) = cfg.ingest.scores.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.ingest.maps.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn metric_ids(&self) -> Result<Vec<MetricId>> {
        self.metrics.iter().map(|m| m.parse()).collect()
    }

    pub fn method_ids(&self) -> Vec<String> {
        self.methods.iter().map(XaiConfig::method_id).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_obs == 0 {
            return bad("n_obs must be positive".into());
        }
        for d in &self.datasets {
            if d.recipe.modality() != self.modality {
                return bad(format!("dataset {} has modality {}, run is {}", d.id, d.recipe.modality().as_str(), self.modality.as_str()));
            }
            if d.n_train == 0 {
                return bad(format!("dataset {} has no training samples", d.id));
            }
        }
        for a in &self.architectures {
            if a.hidden == 0 {
                return bad(format!("architecture {} has no hidden units", a.id));
            }
        }
        let metrics = self.metric_ids()?;
        for m in &self.methods {
            m.validate()?;
        }
        self.metric_config.validate()?;
        let unique = |ids: Vec<String>, what: &str| -> Result<()> {
            let mut sorted = ids.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return Err(Error::Config(format!("duplicate {what} id")));
            }
            if ids.iter().any(|i| i.is_empty() || i.contains(['/', '\\'])) {
                return Err(Error::Config(format!("{what} ids must be non-empty and free of path separators")));
            }
            Ok(())
        };
        unique(self.datasets.iter().map(|d| d.id.clone()).collect(), "dataset")?;
        unique(self.architectures.iter().map(|a| a.id.clone()).collect(), "architecture")?;
        unique(self.method_ids(), "method")?;
        unique(metrics.iter().map(|m| m.as_str().to_string()).collect(), "metric")?;
        if self.ingest.scores.is_none() && (self.datasets.is_empty() || self.architectures.is_empty() || self.methods.is_empty() || metrics.is_empty()) {
            return bad("datasets, architectures, methods and metrics must be non-empty unless scores are ingested".into());
        }
        if !(self.meta.alpha > 0.0 && self.meta.alpha < 1.0) {
            return bad("meta.alpha must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything that shapes the
    /// artifacts. The output directory is excluded, so the same config
    /// yields the same tree wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Stable 64-bit label of a string, for deriving per-id seeds.
pub fn stable_label(s: &str) -> u64 {
    let d = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "modality": "image",
        "seed": 3,
        "datasets": [{"id": "quad", "recipe": "bright_quadrant"}],
        "architectures": [{"id": "cnn"}],
        "methods": [{"method": "IG"}, {"method": "VG", "wrapper": "smooth_grad"}],
        "metrics": ["fc", "SP"]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.n_obs, DEFAULT_OBSERVATIONS);
        assert_eq!(c.datasets[0].n_train, 128);
        assert_eq!(c.method_ids(), vec!["IG", "VG+SG"]);
        assert_eq!(c.metric_ids().unwrap(), vec![MetricId::Fc, MetricId::Sp]);
    }

    #[test]
    fn seed_is_mandatory_and_ids_resolve() {
        let no_seed = MINIMAL.replace("\"seed\": 3,", "");
        assert!(matches!(RunConfig::from_json(&no_seed), Err(Error::Config(_))));
        let bad_metric = MINIMAL.replace("\"SP\"", "\"XX\"");
        assert!(matches!(RunConfig::from_json(&bad_metric), Err(Error::Config(_))));
        let wrong_modality = MINIMAL.replace("\"image\"", "\"volume\"");
        assert!(matches!(RunConfig::from_json(&wrong_modality), Err(Error::Config(_))));
        let dup = MINIMAL.replace("\"SP\"", "\"FC\"");
        assert!(matches!(RunConfig::from_json(&dup), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn architecture_specs_build() {
        let spec = ArchitectureSpec {
            id: "wide".into(),
            kind: ArchitectureKind::Mlp,
            hidden: 8,
            epochs: Some(2),
            lr: None,
        };
        let arch = spec.build(Recipe::Primitives);
        assert_eq!(arch.name, "wide");
        assert_eq!(arch.input_shape, vec![256, 3]);
        assert_eq!(spec.train_config(Recipe::Primitives, 1).epochs, 2);
    }
}
