use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stiffonet_core::dataset::DEFAULT_PER_SCENARIO;
use stiffonet_core::deeponet::{DeepONetSpec, Strategy};
use stiffonet_core::fem::{MaterialSection, UvlDirection};
use stiffonet_core::training::{
    LossKind, LossSpec, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE,
    DEFAULT_SES_NODES,
};
use stiffonet_core::{Error, Result};

fn default_seed() -> u64 {
    42
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

/// One run's configuration. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory of `train`; `eval` and `study` write below it.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default = "default_loss")]
    pub loss: LossSpec,
    #[serde(default)]
    pub train: TrainSection,
    /// Lattice nodes predicted by a Schur-loss network.
    #[serde(default)]
    pub schur_nodes: Option<Vec<usize>>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub study: StudySection,
}

fn default_loss() -> LossSpec {
    LossSpec::new(LossKind::Dd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub span: f64,
    pub height: f64,
    pub section: MaterialSection,
    /// FEM model JSON written by `gen-model`.
    pub file: PathBuf,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            span: 20.0,
            height: 5.0,
            section: MaterialSection::default(),
            file: PathBuf::from("model.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Sampling and split seed; the run seed when absent.
    pub seed: Option<u64>,
    pub per_scenario: usize,
    pub ratio: f64,
    pub uvl_direction: UvlDirection,
    pub dir: PathBuf,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            seed: None,
            per_scenario: DEFAULT_PER_SCENARIO,
            ratio: 0.8,
            uvl_direction: UvlDirection::default(),
            dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub preset: Option<String>,
    pub spec: Option<DeepONetSpec>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            preset: Some("split-2d".into()),
            spec: None,
        }
    }
}

impl NetworkSection {
    pub fn resolve(&self) -> Result<DeepONetSpec> {
        let spec = match (&self.preset, &self.spec) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "network: give either preset or spec, not both".into(),
                ))
            }
            (Some(name), None) => DeepONetSpec::preset(name)?,
            (None, Some(spec)) => spec.clone(),
            (None, None) => DeepONetSpec::split_2d(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Trained model directory; the run output directory when absent.
    pub model: Option<PathBuf>,
    /// Samples exported as field CSVs; the first test sample when empty.
    pub field_samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Epochs per sweep point; `train.epochs` when absent.
    pub epochs: Option<usize>,
    /// Width sweep at six layers.
    pub neurons: Vec<usize>,
    /// Depth sweep at width 48.
    pub layers: Vec<usize>,
    /// `[layers, width]` pairs.
    pub aspect: Vec<[usize; 2]>,
    /// Batch-size sweep on the configured network.
    pub batch_sizes: Vec<usize>,
    pub strategy: Strategy,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            epochs: None,
            neurons: Vec::new(),
            layers: Vec::new(),
            aspect: Vec::new(),
            batch_sizes: Vec::new(),
            strategy: Strategy::Split,
        }
    }
}

/// A parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Verbatim file contents, echoed into output directories.
    pub text: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { config, text, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn model_file(&self) -> PathBuf {
        self.resolve(&self.config.model.file)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.resolve(&self.config.dataset.dir)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out)
    }

    pub fn dataset_seed(&self) -> u64 {
        self.config.dataset.seed.unwrap_or(self.config.seed)
    }

    /// Nodes the network predicts for the configured loss.
    pub fn predicted_nodes(&self, n_nodes: usize) -> Vec<usize> {
        if self.config.loss.kind == LossKind::DdSes {
            self.config
                .schur_nodes
                .clone()
                .unwrap_or_else(|| DEFAULT_SES_NODES.to_vec())
        } else {
            (0..n_nodes).collect()
        }
    }

    /// Copies the config file into `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = dir.join("config.json");
        std::fs::write(&path, &self.text).map_err(|e| Error::Io { path, source: e })
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let d = &self.dataset;
        if d.per_scenario == 0 {
            return Err(Error::Config(
                "dataset.per_scenario must be at least 1".into(),
            ));
        }
        if !(d.ratio > 0.0 && d.ratio < 1.0) {
            return Err(Error::Config("dataset.ratio must lie in (0, 1)".into()));
        }
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 || !(t.learning_rate > 0.0) {
            return Err(Error::Config(
                "train.epochs, train.batch_size and train.learning_rate must be positive".into(),
            ));
        }
        if let Some(nodes) = &self.schur_nodes {
            if nodes.is_empty() {
                return Err(Error::Config("schur_nodes must not be empty".into()));
            }
            let mut sorted = nodes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != nodes.len() {
                return Err(Error::Config("schur_nodes contains duplicates".into()));
            }
        }
        self.network.resolve()?;
        self.model.section.validate()?;
        if self.study.batch_sizes.contains(&0) || self.study.epochs == Some(0) {
            return Err(Error::Config(
                "study batch sizes and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}
