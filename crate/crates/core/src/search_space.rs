//! The configuration space: its dimensions, deterministic enumeration, and
//! the canonical names (branch id, LogDir path, data-collection key) derived
//! from each configuration.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ident::string_enum;
use crate::models::ModelKind;

string_enum! {
    /// Feature ranking strategy.
    pub enum FsMethod {
        InfGain => "infgain",
        BiMaxInfGain => "biMaxInfgain",
        BiMeanInfGain => "biMeanInfgain",
        NoSelect => "noSelect" | "none",
    }
}

string_enum! {
    pub enum ScalerKind {
        Standard => "standard" | "std",
        MinMax => "minmax",
    }
}

string_enum! {
    /// Training-set augmentation.
    pub enum Augmentation {
        NoAug => "noAug" | "none",
        GaussianNoise => "gaussian_noise",
        Mixup => "mixup",
    }
}

string_enum! {
    /// Imbalance handling applied to the training set.
    pub enum Imbalance {
        NoImbl => "noImbl" | "none",
        Smote => "SMOTE",
        Adasyn => "ADASYN",
        RandomUnderSampler => "RandomUnderSampler",
        TomekLinks => "TomekLinks",
    }
}

/// Number of features kept by selection. `All` is the sentinel used when no
/// selection is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureCount {
    Top(usize),
    All,
}

impl fmt::Display for FeatureCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureCount::Top(k) => write!(f, "{k}"),
            FeatureCount::All => f.write_str("all"),
        }
    }
}

impl FromStr for FeatureCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "all" {
            return Ok(FeatureCount::All);
        }
        s.parse::<usize>()
            .map(FeatureCount::Top)
            .map_err(|_| format!("feature count must be a positive integer or `all`, got `{s}`"))
    }
}

impl Serialize for FeatureCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FeatureCount::Top(k) => s.serialize_u64(*k as u64),
            FeatureCount::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(FeatureCount::Top(k as usize)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Declared value lists for every dimension of the space. Lists are ordered;
/// enumeration follows the declared order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaceSpec {
    pub feature_selection_methods: Vec<FsMethod>,
    pub feature_counts: Vec<FeatureCount>,
    pub scalers: Vec<ScalerKind>,
    pub norm_first: Vec<bool>,
    pub augmentations: Vec<Augmentation>,
    pub imbalance_methods: Vec<Imbalance>,
    pub models: Vec<ModelKind>,
    pub split_ratios: Vec<f64>,
    pub prob_thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
}

fn check_nonempty_unique<T: PartialEq + fmt::Debug>(name: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(name, "must list at least one value"));
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(Error::config(name, format!("duplicate value {v:?}")));
        }
    }
    Ok(())
}

fn check_fractions(name: &str, values: &[f64]) -> Result<()> {
    check_nonempty_unique(name, values)?;
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::config(
            name,
            format!("{v} is not in the open interval (0, 1)"),
        ));
    }
    Ok(())
}

impl SearchSpaceSpec {
    /// Checks every structural invariant that does not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        check_nonempty_unique("feature_selection_methods", &self.feature_selection_methods)?;
        check_nonempty_unique("feature_counts", &self.feature_counts)?;
        check_nonempty_unique("scalers", &self.scalers)?;
        check_nonempty_unique("norm_first", &self.norm_first)?;
        check_nonempty_unique("augmentations", &self.augmentations)?;
        check_nonempty_unique("imbalance_methods", &self.imbalance_methods)?;
        check_nonempty_unique("models", &self.models)?;
        check_fractions("split_ratios", &self.split_ratios)?;
        check_fractions("prob_thresholds", &self.prob_thresholds)?;
        check_nonempty_unique("seeds", &self.seeds)?;

        let only_noselect = self.feature_selection_methods == [FsMethod::NoSelect];
        for k in &self.feature_counts {
            match k {
                FeatureCount::Top(0) => {
                    return Err(Error::config(
                        "feature_counts",
                        "feature counts must be >= 1",
                    ))
                }
                FeatureCount::All if !only_noselect => {
                    return Err(Error::config(
                        "feature_counts",
                        "`all` is only valid when noSelect is the sole selection method",
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks the feature counts against a dataset with `n_features` columns.
    pub fn validate_for_features(&self, n_features: usize) -> Result<()> {
        self.validate()?;
        if self
            .feature_selection_methods
            .iter()
            .all(|m| *m == FsMethod::NoSelect)
        {
            return Ok(());
        }
        for k in &self.feature_counts {
            if let FeatureCount::Top(k) = k {
                if *k > n_features {
                    return Err(Error::config(
                        "feature_counts",
                        format!("k = {k} exceeds the dataset's {n_features} features"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The collapsed (k, fs_method) dimension: every numeric k paired with
    /// every selecting method, then a single `all` entry for noSelect.
    fn selection_pairs(&self) -> Vec<(FeatureCount, FsMethod)> {
        let mut pairs = Vec::new();
        for k in &self.feature_counts {
            if let FeatureCount::Top(_) = k {
                for fs in &self.feature_selection_methods {
                    if *fs != FsMethod::NoSelect {
                        pairs.push((*k, *fs));
                    }
                }
            }
        }
        if self.feature_selection_methods.contains(&FsMethod::NoSelect) {
            pairs.push((FeatureCount::All, FsMethod::NoSelect));
        }
        pairs
    }

    /// Number of branches `enumerate_branches` yields.
    pub fn branch_count(&self) -> usize {
        self.selection_pairs().len()
            * self.scalers.len()
            * self.norm_first.len()
            * self.augmentations.len()
            * self.imbalance_methods.len()
            * self.models.len()
            * self.split_ratios.len()
            * self.prob_thresholds.len()
            * self.seeds.len()
    }
}

/// One fully specified pipeline: a branch definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: FeatureCount,
    pub fs_method: FsMethod,
    pub scaler: ScalerKind,
    pub norm_first: bool,
    pub augmentation: Augmentation,
    pub imbalance: Imbalance,
    pub model: ModelKind,
    pub split_ratio: f64,
    pub prob_threshold: f64,
    pub seed: u64,
}

/// Where a branch lives: its run, its LogDir and its canonical id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchAddress {
    pub run_id: String,
    pub logdir: String,
    pub branch_id: String,
}

impl BranchAddress {
    pub fn new(run_id: &str, config: &PipelineConfig) -> Self {
        BranchAddress {
            run_id: run_id.to_string(),
            logdir: logdir_path(config),
            branch_id: branch_id(config),
        }
    }
}

/// Full Cartesian product of the search space in canonical order.
pub fn enumerate_branches(spec: &SearchSpaceSpec) -> Result<Vec<PipelineConfig>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.branch_count());
    for (k, fs_method) in spec.selection_pairs() {
        for &scaler in &spec.scalers {
            for &norm_first in &spec.norm_first {
                for &augmentation in &spec.augmentations {
                    for &imbalance in &spec.imbalance_methods {
                        for &model in &spec.models {
                            for &split_ratio in &spec.split_ratios {
                                for &prob_threshold in &spec.prob_thresholds {
                                    for &seed in &spec.seeds {
                                        out.push(PipelineConfig {
                                            k,
                                            fs_method,
                                            scaler,
                                            norm_first,
                                            augmentation,
                                            imbalance,
                                            model,
                                            split_ratio,
                                            prob_threshold,
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fractions print with at least two decimals (`0.10`), widening only when
/// two decimals would not round-trip, so the rendering stays injective.
pub fn format_fraction(x: f64) -> String {
    let short = format!("{x:.2}");
    if short.parse::<f64>().ok() == Some(x) {
        short
    } else {
        format!("{x}")
    }
}

pub fn norm_token(norm_first: bool) -> &'static str {
    if norm_first {
        "normfirst"
    } else {
        "normlast"
    }
}

pub fn branch_id(config: &PipelineConfig) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
        config.k,
        config.fs_method,
        config.scaler,
        norm_token(config.norm_first),
        config.augmentation,
        config.imbalance,
        config.model.short_id(),
        format_fraction(config.split_ratio),
        format_fraction(config.prob_threshold),
        config.seed
    )
}

/// `<k>/<fs>/<stage1__stage2__stage3>/<model>` with the scaler placed where
/// it executes in the training pipeline.
pub fn logdir_path(config: &PipelineConfig) -> String {
    let scaler = config.scaler.id();
    let aug = config.augmentation.id();
    let imb = config.imbalance.id();
    let stages = if config.norm_first {
        format!("{scaler}__{aug}__{imb}")
    } else {
        format!("{aug}__{imb}__{scaler}")
    };
    format!(
        "{}/{}/{}/{}",
        config.k,
        config.fs_method,
        stages,
        config.model.id()
    )
}

/// Signature over every field that shapes the processed train/test data.
/// Model and threshold are excluded: they act after the data pipeline.
pub fn data_collection_key(config: &PipelineConfig) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}",
        config.k,
        config.fs_method,
        config.scaler,
        norm_token(config.norm_first),
        config.augmentation,
        config.imbalance,
        format_fraction(config.split_ratio),
        config.seed
    )
}

/// Parses a branch id back into its configuration.
pub fn parse_branch_id(id: &str) -> Result<PipelineConfig> {
    let bad = |m: String| Error::config("branch_id", m);
    let parts: Vec<&str> = id.split('|').collect();
    if parts.len() != 10 {
        return Err(bad(format!("expected 10 fields in `{id}`")));
    }
    let norm_first = match parts[3] {
        "normfirst" => true,
        "normlast" => false,
        other => return Err(bad(format!("bad norm order `{other}`"))),
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    Ok(PipelineConfig {
        k: parts[0].parse().map_err(bad)?,
        fs_method: parts[1].parse().map_err(bad)?,
        scaler: parts[2].parse().map_err(bad)?,
        norm_first,
        augmentation: parts[4].parse().map_err(bad)?,
        imbalance: parts[5].parse().map_err(bad)?,
        model: parts[6].parse().map_err(bad)?,
        split_ratio: num(parts[7])?,
        prob_threshold: num(parts[8])?,
        seed: parts[9].parse().map_err(|e| bad(format!("seed: {e}")))?,
    })
}

/// Groups branch indices by data-collection key, keeping first-seen order.
pub fn group_by_collection(configs: &[PipelineConfig]) -> Vec<(String, Vec<usize>)> {
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let key = data_collection_key(c);
        match index.get(&key) {
            Some(&g) => groups[g].1.push(i),
            None => {
                index.insert(key.clone(), groups.len());
                groups.push((key, vec![i]));
            }
        }
    }
    groups
}

/// True when no two configurations share a branch id.
pub fn ids_are_unique(configs: &[PipelineConfig]) -> bool {
    let mut seen = HashSet::with_capacity(configs.len());
    configs.iter().all(|c| seen.insert(branch_id(c)))
}
