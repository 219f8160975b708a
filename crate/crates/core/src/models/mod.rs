//! The six classifier families behind one train / predict interface.

mod ensemble;
mod linear;
pub(crate) mod tree;

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ident::string_enum;

pub(crate) use ensemble::{fit_forest, CartSettings, ForestSettings};

string_enum! {
    /// Classifier family. The canonical id is the LogDir name; the short
    /// form is used inside branch ids.
    pub enum ModelKind {
        Lr => "LogisticRegression" | "LR",
        Svm => "sklearn_SVM" | "SVM",
        Dt => "DTmodel" | "DT",
        Rf => "random_forest" | "RF",
        Gb => "GradientBoosting" | "GB",
        Xgb => "XGBmodel" | "XGB",
    }
}

impl ModelKind {
    pub fn short_id(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Svm => "SVM",
            ModelKind::Dt => "DT",
            ModelKind::Rf => "RF",
            ModelKind::Gb => "GB",
            ModelKind::Xgb => "XGB",
        }
    }

    /// Recognized hyperparameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelKind::Lr => &[
                ("learning_rate", 0.1),
                ("max_iter", 1000.0),
                ("l2", 1e-4),
                ("tol", 1e-6),
            ],
            ModelKind::Svm => &[("c", 1.0), ("epochs", 2000.0), ("eta0", 0.1)],
            ModelKind::Dt => &[
                ("max_depth", 6.0),
                ("min_samples_split", 2.0),
                ("min_samples_leaf", 1.0),
                ("max_bins", 64.0),
            ],
            ModelKind::Rf => &[
                ("n_trees", 100.0),
                ("max_depth", 8.0),
                ("min_samples_leaf", 1.0),
                ("max_bins", 64.0),
            ],
            ModelKind::Gb => &[
                ("n_estimators", 100.0),
                ("learning_rate", 0.1),
                ("max_depth", 3.0),
                ("min_samples_leaf", 1.0),
                ("max_bins", 64.0),
            ],
            ModelKind::Xgb => &[
                ("n_estimators", 100.0),
                ("learning_rate", 0.1),
                ("max_depth", 3.0),
                ("lambda", 1.0),
                ("min_child_weight", 1.0),
                ("max_bins", 64.0),
            ],
        }
    }
}

const INTEGER_KEYS: &[&str] = &[
    "max_iter",
    "epochs",
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "max_bins",
    "n_trees",
    "n_estimators",
];

/// A model family plus hyperparameter overrides; keys not given take the
/// family default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            hyperparameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dim = format!("models.params.{}", self.kind);
        let defaults = self.kind.defaults();
        for (k, &v) in &self.hyperparameters {
            if !defaults.iter().any(|(d, _)| d == k) {
                let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
                return Err(Error::config(
                    dim,
                    format!("unknown hyperparameter `{k}` (known: {})", known.join(", ")),
                ));
            }
            if !v.is_finite() {
                return Err(Error::config(dim, format!("`{k}` must be finite")));
            }
            if INTEGER_KEYS.contains(&k.as_str()) && (v.fract() != 0.0 || v < 0.0) {
                return Err(Error::config(
                    dim,
                    format!("`{k}` must be a non-negative integer"),
                ));
            }
            let ok = match k.as_str() {
                "max_bins" => (2.0..=256.0).contains(&v),
                "max_depth" | "max_iter" | "l2" | "lambda" | "min_child_weight" | "tol" => v >= 0.0,
                "min_samples_split" => v >= 2.0,
                _ => v > 0.0,
            };
            if !ok {
                return Err(Error::config(dim, format!("`{k}` = {v} out of range")));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or_else(|| {
            self.kind
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("no default for `{key}`"))
        })
    }

    fn get_usize(&self, key: &str) -> usize {
        self.get(key) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Linear(linear::LinearModel),
    Tree(tree::Tree),
    Forest(ensemble::Forest),
    Boosted(ensemble::BoostedTrees),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    kind: ModelKind,
    n_features: usize,
    fitted: Fitted,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_inputs(x: ArrayView2<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("non-finite feature value".into()));
    }
    Ok(())
}

pub fn train(spec: &ModelSpec, x: ArrayView2<f64>, y: &[u8], seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::Model(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 || d == 0 {
        return Err(Error::Model(format!(
            "need at least 2 rows and 1 column, got {n}x{d}"
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Model("labels must be 0 or 1".into()));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::Model(
            "training labels contain a single class".into(),
        ));
    }
    check_inputs(x)?;

    let s = spec;
    let fitted = match spec.kind {
        ModelKind::Lr => Fitted::Linear(linear::fit_logistic(
            x,
            y,
            &linear::LrSettings {
                learning_rate: s.get("learning_rate"),
                max_iter: s.get_usize("max_iter"),
                l2: s.get("l2"),
                tol: s.get("tol"),
            },
        )),
        ModelKind::Svm => Fitted::Linear(linear::fit_svm(
            x,
            y,
            &linear::SvmSettings {
                c: s.get("c"),
                epochs: s.get_usize("epochs"),
                eta0: s.get("eta0"),
            },
            seed,
        )),
        ModelKind::Dt => Fitted::Tree(ensemble::fit_cart(
            x,
            y,
            &CartSettings {
                max_depth: s.get_usize("max_depth"),
                min_samples_split: s.get_usize("min_samples_split"),
                min_samples_leaf: s.get_usize("min_samples_leaf"),
                max_bins: s.get_usize("max_bins"),
            },
        )),
        ModelKind::Rf => {
            let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            Fitted::Forest(fit_forest(
                x,
                &target,
                &ForestSettings {
                    n_trees: s.get_usize("n_trees"),
                    cart: CartSettings {
                        max_depth: s.get_usize("max_depth"),
                        min_samples_split: 2,
                        min_samples_leaf: s.get_usize("min_samples_leaf"),
                        max_bins: s.get_usize("max_bins"),
                    },
                    max_features: Some(((d as f64).sqrt().round() as usize).max(1)),
                    bootstrap: true,
                },
                seed,
                "random_forest",
            ))
        }
        ModelKind::Gb | ModelKind::Xgb => {
            let newton = spec.kind == ModelKind::Xgb;
            Fitted::Boosted(ensemble::fit_boosted(
                x,
                y,
                &ensemble::BoostSettings {
                    n_estimators: s.get_usize("n_estimators"),
                    learning_rate: s.get("learning_rate"),
                    max_depth: s.get_usize("max_depth"),
                    min_samples_leaf: if newton {
                        1
                    } else {
                        s.get_usize("min_samples_leaf")
                    },
                    lambda: if newton { s.get("lambda") } else { 0.0 },
                    min_child_weight: if newton {
                        s.get("min_child_weight")
                    } else {
                        0.0
                    },
                    max_bins: s.get_usize("max_bins"),
                },
                if newton {
                    ensemble::Booster::Newton
                } else {
                    ensemble::Booster::Gradient
                },
            ))
        }
    };
    Ok(TrainedModel {
        kind: spec.kind,
        n_features: d,
        fitted,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Per-stage mean training log-loss of a boosted model, starting with
    /// the loss of the constant initial margin.
    pub fn training_loss(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Boosted(b) => Some(&b.training_loss),
            _ => None,
        }
    }

    /// Class-1 probability from each member tree of a forest.
    pub fn member_probabilities(&self, x: ArrayView2<f64>) -> Option<Vec<Vec<f64>>> {
        match &self.fitted {
            Fitted::Forest(f) => Some(
                f.trees
                    .iter()
                    .map(|t| x.rows().into_iter().map(|r| t.predict_row(r)).collect())
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Model(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        check_inputs(x)?;
        let rows = x.rows().into_iter();
        let p: Vec<f64> = match &self.fitted {
            Fitted::Linear(m) => rows.map(|r| sigmoid(m.margin(r))).collect(),
            Fitted::Tree(t) => rows.map(|r| t.predict_row(r)).collect(),
            Fitted::Forest(f) => rows.map(|r| f.predict_row(r)).collect(),
            Fitted::Boosted(b) => rows.map(|r| sigmoid(b.margin(r))).collect(),
        };
        Ok(p.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }
}

pub fn predict_proba(model: &TrainedModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

/// Label 1 iff `p >= threshold`.
pub fn classify(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}
