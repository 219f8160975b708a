//! The declarative run file: dataset, search space, log location and
//! per-model overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec};
use crate::search_space::SearchSpaceSpec;
use crate::transform::TransformSettings;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub schema: Schema,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    #[serde(default)]
    pub params: BTreeMap<ModelKind, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: Option<String>,
    pub log_root: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub search_space: SearchSpaceSpec,
    #[serde(default)]
    pub transform: TransformSettings,
    #[serde(default)]
    pub models: ModelsConfig,
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::config("config", e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative dataset path is taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.search_space.validate()?;
        self.transform.validate()?;
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if let Some(id) = &self.run_id {
            validate_run_id(id)?;
        }
        for kind in self.models.params.keys() {
            self.model_spec(*kind).validate()?;
        }
        Ok(())
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            hyperparameters: self.models.params.get(&kind).cloned().unwrap_or_default(),
        }
    }

    pub fn model_specs(&self) -> BTreeMap<ModelKind, ModelSpec> {
        ModelKind::ALL
            .iter()
            .map(|k| (*k, self.model_spec(*k)))
            .collect()
    }
}

/// Run ids become directory names, so they are restricted to a portable
/// character set.
pub fn validate_run_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "analysis"
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "run_id",
            format!("`{id}` must be non-empty, use only [A-Za-z0-9._-], and not be `analysis`"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
run_id = "desk"
workers = 2

[dataset]
path = "data/diabetes.csv"
schema = "pima"

[search_space]
feature_selection_methods = ["infgain", "noSelect"]
feature_counts = [4, 6]
scalers = ["standard"]
norm_first = [true, false]
augmentations = ["noAug"]
imbalance_methods = ["SMOTE"]
models = ["LogisticRegression", "XGB"]
split_ratios = [0.1]
prob_thresholds = [0.35, 0.5]
seeds = [126]

[transform]
noise_scale = 0.1

[models.params.XGBmodel]
lambda = 2.0
"#;

    #[test]
    fn parses_sample() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.transform.noise_scale, 0.1);
        assert_eq!(cfg.transform.smote_k, 5);
        assert_eq!(
            cfg.model_spec(ModelKind::Xgb).hyperparameters["lambda"],
            2.0
        );
        assert!(cfg.model_spec(ModelKind::Lr).hyperparameters.is_empty());
    }

    #[test]
    fn empty_models_list_names_the_dimension() {
        let text = SAMPLE.replace(r#"models = ["LogisticRegression", "XGB"]"#, "models = []");
        match RunConfig::parse(&text) {
            Err(Error::Config { dimension, .. }) => assert_eq!(dimension, "models"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_hyperparameter_rejected() {
        let text = SAMPLE.replace("lambda = 2.0", "depth = 2.0");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn run_id_rules() {
        assert!(validate_run_id("pima-seed_7.a").is_ok());
        assert!(validate_run_id("../x").is_err());
        assert!(validate_run_id("analysis").is_err());
        assert!(validate_run_id("").is_err());
    }
}
