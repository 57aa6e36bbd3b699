//! TOML run configuration with dotted keys, e.g. `train.temperature = 0.07`.
//!
//! ```toml
//! seed = 7
//! pipeline = "nora"            # nora | scl_lr | lr | knn | rf
//!
//! [data]
//! source = "uci"               # csv | uci | synth
//! path = "data/chronic_kidney_disease_full.arff"
//!
//! [resample]
//! enabled = true
//! placement = "inside_folds"   # or "before_split"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nora_core::classifiers::{ForestConfig, LogisticConfig, DEFAULT_KNN_K};
use nora_core::cohort::CohortSpec;
use nora_core::encoder::TrainConfig;
use nora_core::pipeline::{PipelineConfig, PipelineKind, ResamplePlacement};
use nora_core::resample::DEFAULT_SMOTE_K;
use serde::{Deserialize, Serialize};

use crate::dataio::default_missing_tokens;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: PathBuf,
        #[serde(default = "default_missing_tokens")]
        missing_tokens: Vec<String>,
    },
    Uci {
        path: PathBuf,
    },
    /// Unset fields keep the default cohort; `seed` defaults to the run seed.
    Synth {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_total: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class1_fraction: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        missing_rate: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSection {
    pub enabled: bool,
    pub k: usize,
    pub placement: ResamplePlacement,
}

impl Default for ResampleSection {
    fn default() -> Self {
        Self {
            enabled: true,
            k: DEFAULT_SMOTE_K,
            placement: ResamplePlacement::InsideFolds,
        }
    }
}

/// Encoder hyperparameters; the encoder seed always comes from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub temperature: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            temperature: t.temperature,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSection {
    pub k: usize,
}

impl Default for KnnSection {
    fn default() -> Self {
        Self { k: DEFAULT_KNN_K }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldoutSection {
    pub test_fraction: f64,
}

impl Default for HoldoutSection {
    fn default() -> Self {
        Self { test_fraction: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSection {
    pub path: PathBuf,
}

fn default_pipeline() -> PipelineKind {
    PipelineKind::Nora
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_pipeline")]
    pub pipeline: PipelineKind,
    pub data: DataSource,
    #[serde(default)]
    pub resample: ResampleSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub logistic: LogisticConfig,
    #[serde(default)]
    pub knn: KnnSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub holdout: HoldoutSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleSection>,
}

fn resolve(base: &Path, p: &mut PathBuf) -> Result<()> {
    let joined = if p.is_absolute() { p.clone() } else { base.join(&*p) };
    *p = std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))?;
    Ok(())
}

impl RunConfig {
    /// `seed_override` (from `--seed`) replaces or supplies the top-level seed.
    pub fn from_toml_str(text: &str, base_dir: &Path, seed_override: Option<u64>) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if let Some(seed) = seed_override {
            let seed = i64::try_from(seed)
                .map_err(|_| Error::Config(format!("seed {seed} does not fit a TOML integer")))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        if !table.contains_key("seed") {
            return Err(Error::Config("seed is required (set `seed` or pass --seed)".into()));
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        match &mut cfg.data {
            DataSource::Csv { path, schema, .. } => {
                resolve(base_dir, path)?;
                resolve(base_dir, schema)?;
            }
            DataSource::Uci { path } => resolve(base_dir, path)?,
            DataSource::Synth { .. } => {}
        }
        if let Some(b) = &mut cfg.bundle {
            resolve(base_dir, &mut b.path)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, seed_override)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.cv.k < 2 {
            return Err(Error::Config(format!("cv.k = {}, need k >= 2", self.cv.k)));
        }
        let f = self.holdout.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("holdout.test_fraction = {f}, need 0 < f < 1")));
        }
        if let Some(spec) = self.cohort_spec() {
            spec.validate().map_err(|e| Error::Config(format!("data: {e}")))?;
        }
        Ok(())
    }

    /// Fully resolved document; loading it reproduces `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let t = &self.train;
        PipelineConfig {
            kind: self.pipeline,
            resample: self.resample.enabled,
            smote_k: self.resample.k,
            placement: self.resample.placement,
            train: TrainConfig {
                learning_rate: t.learning_rate,
                batch_size: t.batch_size,
                epochs: t.epochs,
                temperature: t.temperature,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
                seed: self.seed,
            },
            forest: self.forest,
            logistic: self.logistic,
            knn_k: self.knn.k,
        }
    }

    /// Cohort parameters when the data source is `synth`.
    pub fn cohort_spec(&self) -> Option<CohortSpec> {
        let DataSource::Synth {
            n_total,
            seed,
            class1_fraction,
            missing_rate,
        } = &self.data
        else {
            return None;
        };
        let base = CohortSpec::default();
        Some(CohortSpec {
            n_total: n_total.unwrap_or(base.n_total),
            class1_fraction: class1_fraction.unwrap_or(base.class1_fraction),
            missing_rate: missing_rate.unwrap_or(base.missing_rate),
            seed: seed.unwrap_or(self.seed),
            classes: base.classes,
        })
    }

    /// Files the run reads, as `(role, path)`.
    pub fn input_files(&self) -> Vec<(&'static str, &Path)> {
        let mut out = Vec::new();
        match &self.data {
            DataSource::Csv { path, schema, .. } => {
                out.push(("data", path.as_path()));
                out.push(("schema", schema.as_path()));
            }
            DataSource::Uci { path } => out.push(("data", path.as_path())),
            DataSource::Synth { .. } => {}
        }
        if let Some(b) = &self.bundle {
            out.push(("bundle", b.path.as_path()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, Path::new("/base"), None)
    }

    #[test]
    fn defaults_follow_published_settings() {
        let c = parse("seed = 1\n[data]\nsource = \"synth\"\n").unwrap();
        let p = c.pipeline_config();
        assert_eq!(p.kind, PipelineKind::Nora);
        assert_eq!((p.train.learning_rate, p.train.batch_size, p.train.epochs), (1e-3, 64, 100));
        assert_eq!(p.train.temperature, 0.07);
        assert_eq!((p.forest.n_trees, p.forest.max_depth), (100, 10));
        assert_eq!(c.cv.k, 5);
        assert!(p.resample);
        assert_eq!(c.cohort_spec().unwrap().seed, 1);
    }

    #[test]
    fn dotted_keys_and_relative_paths() {
        let c = parse(
            "seed = 3\npipeline = \"rf\"\ntrain.temperature = 0.5\nforest.n_trees = 7\n\
             data.source = \"csv\"\ndata.path = \"d/x.csv\"\ndata.schema = \"/abs/s.json\"\n",
        )
        .unwrap();
        assert_eq!(c.train.temperature, 0.5);
        assert_eq!(c.forest.n_trees, 7);
        assert_eq!(c.forest.max_depth, 10);
        match &c.data {
            DataSource::Csv {
                path,
                schema,
                missing_tokens,
            } => {
                assert_eq!(path, Path::new("/base/d/x.csv"));
                assert_eq!(schema, Path::new("/abs/s.json"));
                assert_eq!(missing_tokens, &["", "?"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_document_round_trips() {
        let c = parse("seed = 9\npipeline = \"scl_lr\"\n[data]\nsource = \"uci\"\npath = \"u.arff\"\n[resample]\nplacement = \"before_split\"\n").unwrap();
        let again = RunConfig::from_toml_str(&c.to_toml(), Path::new("/elsewhere"), None).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn config_errors() {
        let cases = [
            "[data]\nsource = \"synth\"\n",
            "seed = 1\npipeline = \"svm\"\n[data]\nsource = \"synth\"\n",
            "seed = 1\n",
            "seed = 1\n[data]\nsource = \"uci\"\n",
            "seed = 1\ncv.k = 1\n[data]\nsource = \"synth\"\n",
            "seed = 1\ntrain.temperature = 0.0\n[data]\nsource = \"synth\"\n",
            "seed = 1\ntrain.tempreature = 0.1\n[data]\nsource = \"synth\"\n",
            "seed = 1\nholdout.test_fraction = 1.0\n[data]\nsource = \"synth\"\n",
            "seed = 1\n[data]\nsource = \"synth\"\nmissing_rate = 2.0\n",
            "seed = = 1",
        ];
        for text in cases {
            let err = parse(text).unwrap_err();
            assert_eq!(err.exit_code(), crate::EXIT_CONFIG, "{text:?}: {err}");
        }
    }

    #[test]
    fn seed_override_supplies_missing_seed() {
        let c = RunConfig::from_toml_str("[data]\nsource = \"synth\"\n", Path::new("/"), Some(42)).unwrap();
        assert_eq!(c.seed, 42);
    }
}
