//! Experiment configuration: one JSON file plus `--set key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tripath_core::network::{Architecture, LabelHead};
use tripath_core::noise::NoiseSpec;
use tripath_core::optim::{OptimizerConfig, TrainPlan};
use tripath_core::rbm::PretrainConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub num_classes: usize,
    /// Use only the first this-many training images.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Threshold pixels at 0.5 on load.
    pub binarize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        let dir = Path::new("data/mnist");
        DataConfig {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
            num_classes: 10,
            train_limit: None,
            test_limit: None,
            binarize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// `null` makes the noisy images identical to the clean ones.
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    /// Corrupted copies per training image. The test set always gets one.
    pub replication: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            noise: Some(NoiseSpec::type1()),
            seed: 1,
            replication: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Encoder hidden sizes; the last is the shared code.
    pub encoder: Vec<usize>,
    pub label_head: LabelHead,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let mnist = Architecture::mnist();
        ArchConfig {
            encoder: mnist.encoder,
            label_head: mnist.label_head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Images per montage (taken from the start of the test set).
    pub montage_count: usize,
    pub montage_cols: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            montage_count: 100,
            montage_cols: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub corpus: CorpusConfig,
    pub architecture: ArchConfig,
    pub lambda: f64,
    /// `null` skips pretraining.
    pub pretrain: Option<PretrainConfig>,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Start `train` from this TPN1 checkpoint instead of initializing.
    pub resume_from: Option<PathBuf>,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            corpus: CorpusConfig::default(),
            architecture: ArchConfig::default(),
            lambda: 1.0,
            pretrain: Some(PretrainConfig::default()),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            resume_from: None,
            eval: EvalConfig::default(),
        }
    }
}

/// Applies `key.path=value` to a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts = key.split('.').peekable();
    let mut node = doc;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(CliError::Config(format!("override key {key:?} has an empty segment")));
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {part:?} is inside a non-object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Parses `text`, applies `overrides` in order, and resolves relative
    /// paths against `base_dir`.
    pub fn from_json(text: &str, overrides: &[String], base_dir: &Path) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        for p in [
            &mut cfg.data.train_images,
            &mut cfg.data.train_labels,
            &mut cfg.data.test_images,
            &mut cfg.data.test_labels,
            &mut cfg.output_dir,
        ] {
            resolve(base_dir, p);
        }
        if let Some(p) = cfg.resume_from.as_mut() {
            resolve(base_dir, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, overrides, base)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if self.corpus.replication == 0 {
            return bad("corpus.replication must be at least 1".into());
        }
        if self.data.num_classes == 0 || self.data.num_classes > 256 {
            return bad("data.num_classes must be between 1 and 256".into());
        }
        if self.architecture.encoder.is_empty() || self.architecture.encoder.contains(&0) {
            return bad("architecture.encoder needs positive layer sizes".into());
        }
        if self.eval.montage_cols == 0 {
            return bad("eval.montage_cols must be positive".into());
        }
        if let Some(spec) = &self.corpus.noise {
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize) -> Result<Architecture> {
        Architecture::new(
            input_dim,
            self.architecture.encoder.clone(),
            self.data.num_classes,
            self.architecture.label_head,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn plan(&self) -> TrainPlan {
        TrainPlan {
            pretrain: self.pretrain.clone(),
            optimizer: self.optimizer.clone(),
            seed: self.seed,
        }
    }
}
