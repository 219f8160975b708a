use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::table::{metric_idx, value_order, Component, MergedTable, TableRow};
use crate::error::{Error, Result};
use crate::models::{fit_forest, CartSettings, ForestSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportanceLevel {
    /// One integer-coded feature per component.
    Component,
    /// One indicator feature per component value.
    Part,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Importance {
    pub level: ImportanceLevel,
    pub metric: String,
    pub features: Vec<String>,
    /// Non-negative, sums to 1.
    pub importance: Vec<f64>,
    pub warning: Option<String>,
}

const MIN_ROWS: usize = 50;

fn canonical_key(r: &TableRow) -> (String, String) {
    (r.branch_id.clone(), r.run_id.clone())
}

/// Random-forest regression of `metric` on the configuration columns;
/// importance is each feature's total variance reduction, normalized.
pub fn rf_importance(
    table: &MergedTable,
    metric: &str,
    level: ImportanceLevel,
    n_trees: usize,
    seed: u64,
) -> Result<Importance> {
    let mi = metric_idx(metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("empty table".into()));
    }
    if n_trees == 0 {
        return Err(Error::Analysis("n_trees must be positive".into()));
    }
    let mut warning = None;
    if table.len() < MIN_ROWS {
        let w = format!(
            "only {} rows; importances are unreliable below {MIN_ROWS}",
            table.len()
        );
        log::warn!("{w}");
        warning = Some(w);
    }

    // a fixed row order makes the fit independent of input order
    let mut rows: Vec<&TableRow> = table.rows.iter().collect();
    rows.sort_by_key(|r| canonical_key(r));

    let comps = Component::PIPELINE;
    let values: Vec<Vec<String>> = comps.iter().map(|c| table.values_of(*c)).collect();
    let features: Vec<String> = match level {
        ImportanceLevel::Component => comps.iter().map(|c| c.id().to_string()).collect(),
        ImportanceLevel::Part => comps
            .iter()
            .zip(&values)
            .flat_map(|(c, vs)| vs.iter().map(move |v| format!("{c}={v}")))
            .collect(),
    };
    let n = rows.len();
    let mut x = Array2::<f64>::zeros((n, features.len()));
    for (i, r) in rows.iter().enumerate() {
        let mut col = 0;
        for (c, vs) in comps.iter().zip(&values) {
            let v = c.value(&r.config);
            let code = vs
                .binary_search_by(|probe| value_order(probe, &v))
                .expect("value listed");
            match level {
                ImportanceLevel::Component => {
                    x[[i, col]] = code as f64;
                    col += 1;
                }
                ImportanceLevel::Part => {
                    x[[i, col + code]] = 1.0;
                    col += vs.len();
                }
            }
        }
    }
    let target: Vec<f64> = rows.iter().map(|r| r.metrics[mi]).collect();
    let uniform = vec![1.0 / features.len() as f64; features.len()];
    let constant = target.iter().all(|v| *v == target[0]);
    if constant {
        let w = format!("metric `{metric}` is constant; importances are uniform");
        log::warn!("{w}");
        return Ok(Importance {
            level,
            metric: metric.to_string(),
            features,
            importance: uniform,
            warning: Some(w),
        });
    }
    let forest = fit_forest(
        x.view(),
        &target,
        &ForestSettings {
            n_trees,
            cart: CartSettings {
                max_depth: 12,
                min_samples_split: 2,
                min_samples_leaf: 1,
                max_bins: 256,
            },
            max_features: None,
            bootstrap: true,
        },
        seed,
        "rf_importance",
    );
    let total: f64 = forest.importance.iter().sum();
    let importance = if total > 0.0 {
        forest.importance.iter().map(|v| v / total).collect()
    } else {
        let w = "no split reduced variance; importances are uniform".to_string();
        log::warn!("{w}");
        warning = Some(w);
        uniform
    };
    Ok(Importance {
        level,
        metric: metric.to_string(),
        features,
        importance,
        warning,
    })
}
