use std::collections::BTreeMap;

use serde::Serialize;

use super::table::{metric_idx, value_order, Component, MergedTable, TableRow};
use crate::error::{Error, Result};
use crate::metrics::METRIC_NAMES;
use crate::models::ModelKind;

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

pub fn aggregate_stats(table: &MergedTable, metric: &str) -> Result<(f64, f64)> {
    let col = table.column(metric)?;
    if col.len() < 2 {
        return Err(Error::Analysis(format!(
            "need at least 2 rows, have {}",
            col.len()
        )));
    }
    Ok(mean_std(&col))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow<'a> {
    pub rank: usize,
    pub value: f64,
    pub row: &'a TableRow,
}

/// Best `n` rows by `metric` (descending, or ascending for a bottom-n
/// view); ties go to the lower BranchID, then RunID.
pub fn rank_pipelines<'a>(
    table: &'a MergedTable,
    metric: &str,
    n: usize,
    ascending: bool,
) -> Result<Vec<RankedRow<'a>>> {
    if n == 0 {
        return Err(Error::Analysis("n must be at least 1".into()));
    }
    let i = metric_idx(metric)?;
    let mut rows: Vec<&TableRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        let ord = if ascending {
            a.metrics[i].total_cmp(&b.metrics[i])
        } else {
            b.metrics[i].total_cmp(&a.metrics[i])
        };
        ord.then_with(|| a.branch_id.cmp(&b.branch_id))
            .then_with(|| a.run_id.cmp(&b.run_id))
    });
    Ok(rows
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(k, row)| RankedRow {
            rank: k + 1,
            value: row.metrics[i],
            row,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueStats {
    pub value: String,
    pub mean: f64,
    pub std: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentStats {
    pub component: Component,
    pub metric: String,
    pub values: Vec<ValueStats>,
    /// Spread of the per-value means.
    pub delta: f64,
    /// Unweighted mean of the per-value standard deviations.
    pub mean_sigma: f64,
    /// Population variance of the per-value means.
    pub sensitivity: f64,
}

pub fn component_stats(
    table: &MergedTable,
    component: Component,
    metric: &str,
) -> Result<ComponentStats> {
    let i = metric_idx(metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("empty table".into()));
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        groups
            .entry(component.value(&r.config))
            .or_default()
            .push(r.metrics[i]);
    }
    let mut values: Vec<ValueStats> = groups
        .into_iter()
        .map(|(value, v)| {
            let (mean, std) = mean_std(&v);
            ValueStats {
                value,
                mean,
                std,
                support: v.len(),
            }
        })
        .collect();
    values.sort_by(|a, b| value_order(&a.value, &b.value));
    let means: Vec<f64> = values.iter().map(|v| v.mean).collect();
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let (_, spread) = mean_std(&means);
    Ok(ComponentStats {
        component,
        metric: metric.to_string(),
        mean_sigma: values.iter().map(|v| v.std).sum::<f64>() / values.len() as f64,
        values,
        delta: hi - lo,
        sensitivity: spread * spread,
    })
}

/// Mean rank plus `lambda` times the population std of the ranks.
pub fn nrrs(ranks: &[f64], lambda: f64) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Analysis("nrrs needs at least one rank".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Analysis("lambda must be non-negative".into()));
    }
    let (m, s) = mean_std(ranks);
    Ok(m + lambda * s)
}

/// Ranks within one block, 1 = highest value; ties share the average rank.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Seeds × models matrix of the mean metric of each model within each
/// seed. Seeds and models ascend; a model missing from some seed leaves a
/// `None` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBlocks {
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl SeedBlocks {
    pub fn complete(&self) -> Result<Vec<Vec<f64>>> {
        self.cells
            .iter()
            .zip(&self.seeds)
            .map(|(row, seed)| {
                row.iter()
                    .zip(&self.models)
                    .map(|(c, m)| {
                        c.ok_or_else(|| {
                            Error::Analysis(format!("model {m} has no rows for seed {seed}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn seed_blocks(table: &MergedTable, metric: &str) -> Result<SeedBlocks> {
    let i = metric_idx(metric)?;
    let mut acc: BTreeMap<(u64, ModelKind), (f64, usize)> = BTreeMap::new();
    for r in &table.rows {
        let e = acc
            .entry((r.config.seed, r.config.model))
            .or_insert((0.0, 0));
        e.0 += r.metrics[i];
        e.1 += 1;
    }
    let mut seeds: Vec<u64> = acc.keys().map(|k| k.0).collect();
    seeds.dedup();
    let mut models: Vec<ModelKind> = acc.keys().map(|k| k.1).collect();
    models.sort();
    models.dedup();
    let cells = seeds
        .iter()
        .map(|s| {
            models
                .iter()
                .map(|m| acc.get(&(*s, *m)).map(|(sum, n)| sum / *n as f64))
                .collect()
        })
        .collect();
    Ok(SeedBlocks {
        seeds,
        models,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    /// Config cells except Seed and RunID, in component order.
    pub key: Vec<String>,
    pub model: ModelKind,
    pub n_seeds: usize,
    /// Per metric, in `METRIC_NAMES` order.
    pub mean: Vec<f64>,
    /// `None` when the group has a single seed.
    pub std: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRobustness {
    pub model: ModelKind,
    pub groups: usize,
    pub mean: Vec<f64>,
    /// Average over the model's multi-seed groups.
    pub std: Vec<Option<f64>>,
    pub mean_rank: f64,
    pub rank_std: f64,
    pub nrrs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessSummary {
    pub rank_metric: String,
    pub lambda: f64,
    pub groups: Vec<GroupSummary>,
    pub models: Vec<ModelRobustness>,
}

/// Seed-replicate statistics. Groups share every pipeline setting and
/// differ only in seed (and run); model ranks are computed per seed on
/// `rank_metric`.
pub fn cross_seed_summary(
    table: &MergedTable,
    rank_metric: &str,
    lambda: f64,
) -> Result<RobustnessSummary> {
    metric_idx(rank_metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("empty table".into()));
    }
    let mut groups: BTreeMap<Vec<String>, (ModelKind, Vec<&TableRow>)> = BTreeMap::new();
    for r in &table.rows {
        let key: Vec<String> = Component::PIPELINE
            .iter()
            .map(|c| c.value(&r.config))
            .collect();
        groups
            .entry(key)
            .or_insert_with(|| (r.config.model, Vec::new()))
            .1
            .push(r);
    }
    let mut out_groups = Vec::with_capacity(groups.len());
    for (key, (model, rows)) in groups {
        let mut seeds: Vec<u64> = rows.iter().map(|r| r.config.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut mean = Vec::with_capacity(METRIC_NAMES.len());
        let mut std = Vec::with_capacity(METRIC_NAMES.len());
        for m in 0..METRIC_NAMES.len() {
            let v: Vec<f64> = rows.iter().map(|r| r.metrics[m]).collect();
            let (mu, sd) = mean_std(&v);
            mean.push(mu);
            std.push((seeds.len() >= 2).then_some(sd));
        }
        out_groups.push(GroupSummary {
            key,
            model,
            n_seeds: seeds.len(),
            mean,
            std,
        });
    }

    let blocks = seed_blocks(table, rank_metric)?;
    let mut per_model_ranks: BTreeMap<ModelKind, Vec<f64>> = BTreeMap::new();
    for row in &blocks.cells {
        let present: Vec<(ModelKind, f64)> = blocks
            .models
            .iter()
            .zip(row)
            .filter_map(|(m, c)| c.map(|v| (*m, v)))
            .collect();
        let vals: Vec<f64> = present.iter().map(|p| p.1).collect();
        for ((m, _), r) in present.iter().zip(descending_ranks(&vals)) {
            per_model_ranks.entry(*m).or_default().push(r);
        }
    }

    let mut models = Vec::new();
    for m in &blocks.models {
        let mine: Vec<&GroupSummary> = out_groups.iter().filter(|g| g.model == *m).collect();
        let n = mine.len() as f64;
        let mean: Vec<f64> = (0..METRIC_NAMES.len())
            .map(|k| mine.iter().map(|g| g.mean[k]).sum::<f64>() / n)
            .collect();
        let std: Vec<Option<f64>> = (0..METRIC_NAMES.len())
            .map(|k| {
                let v: Vec<f64> = mine.iter().filter_map(|g| g.std[k]).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let ranks = &per_model_ranks[m];
        let (mean_rank, rank_std) = mean_std(ranks);
        models.push(ModelRobustness {
            model: *m,
            groups: mine.len(),
            mean,
            std,
            mean_rank,
            rank_std,
            nrrs: nrrs(ranks, lambda)?,
        });
    }
    Ok(RobustnessSummary {
        rank_metric: rank_metric.to_string(),
        lambda,
        groups: out_groups,
        models,
    })
}
