//! Experiment configuration: one JSON file describing model, training,
//! pipeline, embedding source, and data paths. Unknown fields are rejected;
//! optional sections get explicit defaults that are echoed back into the run
//! manifest so every run records the exact settings it used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sugmine::classifier::{ModelConfig, TrainConfig};
use sugmine::preprocess::PipelineConfig;
use sugmine::vocab::EmbeddingSource;
use sugmine::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub source: EmbeddingSource,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Defaults to true for random embeddings; pretrained vectors are
    /// always frozen.
    #[serde(default)]
    pub trainable: Option<bool>,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec {
            source: EmbeddingSource::Random,
            path: None,
            trainable: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub train: PathBuf,
    pub val: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

fn default_min_count() -> usize {
    1
}

fn default_members() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub embedding: EmbeddingSpec,
    pub data: DataSpec,
    #[serde(default = "default_min_count")]
    pub vocab_min_count: usize,
    #[serde(default = "default_members")]
    pub members: usize,
}

/// A parsed config plus the directory it was loaded from; relative data and
/// vector paths resolve against that directory, so configs can ship next to
/// their corpora.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl Experiment {
    pub fn load(path: impl AsRef<Path>) -> Result<Experiment> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let exp = Experiment { cfg, base_dir };
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.model.validate()?;
        self.cfg.train.validate()?;
        if self.cfg.vocab_min_count == 0 {
            return Err(Error::Config("vocab_min_count must be at least 1".into()));
        }
        if self.cfg.members == 0 {
            return Err(Error::Config("members must be at least 1".into()));
        }
        match self.cfg.embedding.source {
            EmbeddingSource::PretrainedFile => {
                if self.cfg.embedding.path.is_none() {
                    return Err(Error::Config(
                        "embedding.source is pretrained_file but embedding.path is missing".into(),
                    ));
                }
                if self.cfg.embedding.trainable == Some(true) {
                    return Err(Error::Config(
                        "pretrained vectors are frozen; embedding.trainable cannot be true".into(),
                    ));
                }
            }
            EmbeddingSource::Random => {
                if self.cfg.embedding.path.is_some() {
                    return Err(Error::Config(
                        "embedding.path is set but embedding.source is random".into(),
                    ));
                }
            }
        }
        for (name, p) in [
            ("data.train", Some(&self.cfg.data.train)),
            ("data.val", Some(&self.cfg.data.val)),
            ("data.test", self.cfg.data.test.as_ref()),
            ("embedding.path", self.cfg.embedding.path.as_ref()),
        ] {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::Config(format!(
                        "{name} does not exist: {}",
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn train_path(&self) -> PathBuf {
        self.resolve(&self.cfg.data.train)
    }

    pub fn val_path(&self) -> PathBuf {
        self.resolve(&self.cfg.data.val)
    }

    pub fn embedding_trainable(&self) -> bool {
        match self.cfg.embedding.source {
            EmbeddingSource::Random => self.cfg.embedding.trainable.unwrap_or(true),
            EmbeddingSource::PretrainedFile => false,
        }
    }
}
