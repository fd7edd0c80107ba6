use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{PartitionKind, PartitionSpec};
use crate::dp::{GeneratorConfig, SharePolicy};
use crate::error::{Error, Result};
use crate::fl::{DistributionPolicy, LocalTraining};
use crate::nn::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    #[serde(rename = "dpsda-fl")]
    DpsdaFl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::FedAvg, Algorithm::FedProx, Algorithm::DpsdaFl];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FedAvg => "fedavg",
            Algorithm::FedProx => "fedprox",
            Algorithm::DpsdaFl => "dpsda-fl",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::FedAvg => "FedAvg",
            Algorithm::FedProx => "FedProx",
            Algorithm::DpsdaFl => "DPSDA-FL",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Toy,
    Cifar10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// CIFAR-10 binary directory; falls back to the data-root environment variable.
    pub path: Option<PathBuf>,
    /// Real examples per class set aside for the held-out oracle generator.
    pub heldout_per_class: usize,
    /// Optional side length to downsample CIFAR images to.
    pub resize: Option<usize>,
    pub toy_classes: usize,
    pub toy_train_per_class: usize,
    pub toy_test_per_class: usize,
    pub toy_feature_dim: usize,
    pub toy_separation: f64,
    pub toy_modes: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Cifar10,
            path: None,
            heldout_per_class: 1000,
            resize: None,
            toy_classes: 10,
            toy_train_per_class: 500,
            toy_test_per_class: 100,
            toy_feature_dim: 10,
            toy_separation: 4.0,
            toy_modes: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PaperCnn,
    ToyMlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Hidden width of the toy MLP.
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::PaperCnn,
            hidden: 32,
        }
    }
}

impl ModelConfig {
    /// Concrete architecture for data of `input_shape` with `classes` labels.
    pub fn architecture(&self, input_shape: &[usize], classes: usize) -> Result<Architecture> {
        match self.kind {
            ModelKind::PaperCnn => {
                let arch = Architecture::PaperCnn;
                if input_shape != arch.input_shape().as_slice() || classes != arch.num_classes() {
                    return Err(Error::Config(format!(
                        "PaperCnn needs {:?} inputs and {} classes, data has {input_shape:?} and {classes}",
                        arch.input_shape(),
                        arch.num_classes()
                    )));
                }
                Ok(arch)
            }
            ModelKind::ToyMlp => Ok(Architecture::ToyMlp {
                inputs: input_shape.iter().product(),
                hidden: self.hidden,
                classes,
            }),
        }
    }
}

/// Every experiment setting; defaults reproduce the reference CIFAR-10 setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub algorithm: Algorithm,
    pub fedprox_mu: f64,
    /// Weight client models by example count instead of the plain mean.
    pub weighted_aggregation: bool,
    pub seeds: Vec<u64>,
    pub partition: PartitionKind,
    pub generator: GeneratorConfig,
    pub share: SharePolicy,
    pub distribution: DistributionPolicy,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            clients: 5,
            rounds: 20,
            local_epochs: 2,
            learning_rate: 0.1,
            batch_size: 32,
            algorithm: Algorithm::DpsdaFl,
            fedprox_mu: 0.001,
            weighted_aggregation: false,
            seeds: vec![0, 1, 2],
            partition: PartitionKind::LabelSkew {
                classes_per_client: 2,
            },
            generator: GeneratorConfig::default(),
            share: SharePolicy::default(),
            distribution: DistributionPolicy::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale preset: multi-modal Gaussian clusters and a small MLP.
    /// Protocol settings are unchanged; synthetic volume keeps the same
    /// received-to-local ratio (one fifth) as the CIFAR-10 defaults.
    pub fn toy() -> Self {
        Self {
            share: SharePolicy {
                samples_per_shared_class: 400,
                ..SharePolicy::default()
            },
            generator: GeneratorConfig {
                feature_range: (-12.0, 12.0),
                ..GeneratorConfig::default()
            },
            dataset: DatasetConfig {
                source: DatasetSource::Toy,
                heldout_per_class: 400,
                ..DatasetConfig::default()
            },
            model: ModelConfig {
                kind: ModelKind::ToyMlp,
                hidden: 32,
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::with_overrides(text, &[])
    }

    /// Parses `text` after applying `key=value` overrides, where keys may be
    /// dotted (`dataset.source=toy`). Values are read as TOML and fall back
    /// to plain strings.
    pub fn with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: Self = table
            .try_into()
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::with_overrides(&text, overrides).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.clients == 0 {
            return fail("clients must be at least 1".into());
        }
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.fedprox_mu.is_finite() && self.fedprox_mu >= 0.0) {
            return fail(format!("fedprox_mu must be >= 0, got {}", self.fedprox_mu));
        }
        if self.seeds.is_empty() {
            return fail("seeds must list at least one seed".into());
        }
        self.share.validate()?;
        self.generator
            .validate()
            .map_err(|e| Error::Config(format!("generator: {e}")))?;
        Ok(())
    }

    pub fn partition_spec(&self, seed: u64) -> PartitionSpec {
        PartitionSpec {
            kind: self.partition.clone(),
            n_clients: self.clients,
            seed,
        }
    }

    pub fn local_training(&self) -> LocalTraining {
        LocalTraining {
            epochs: self.local_epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            proximal_mu: (self.algorithm == Algorithm::FedProx).then_some(self.fedprox_mu),
        }
    }

    pub fn for_algorithm(&self, algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..self.clone()
        }
    }

    /// First 12 hex digits of a SHA-256 over the canonical JSON form, with
    /// the seed list cleared so every seed of one setup shares a hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seeds.clear();
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("override {item:?} has an empty key")))?;
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: {part} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
