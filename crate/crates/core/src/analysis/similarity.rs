use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::mean_std;
use super::table::{metric_idx, value_order, Component, MergedTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    pub component: Component,
    pub metrics: Vec<String>,
    pub normalized: bool,
    pub values: Vec<String>,
    /// `None` where a pair never shares a context.
    pub entries: Vec<Vec<Option<f64>>>,
    /// Number of matched contexts behind each entry.
    pub contexts: Vec<Vec<usize>>,
}

impl SimilarityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.values.iter().position(|v| v == a)?;
        let j = self.values.iter().position(|v| v == b)?;
        self.entries[i][j]
    }
}

/// Mean over matched contexts of the RMS metric difference between two
/// values of `component`. A context is a setting of every other config
/// column, RunID included.
pub fn rms_value_similarity(
    table: &MergedTable,
    component: Component,
    metrics: &[&str],
    normalized: bool,
) -> Result<SimilarityMatrix> {
    if metrics.is_empty() {
        return Err(Error::Analysis("at least one metric is required".into()));
    }
    let idx: Vec<usize> = metrics
        .iter()
        .map(|m| metric_idx(m))
        .collect::<Result<_>>()?;
    let values = table.values_of(component);
    if values.len() < 2 {
        return Err(Error::Analysis(format!(
            "component {component} has {} value(s) in this table; need at least 2",
            values.len()
        )));
    }
    let others: Vec<Component> = Component::ALL
        .iter()
        .copied()
        .filter(|c| *c != component)
        .collect();
    let mut contexts: BTreeMap<Vec<String>, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in &table.rows {
        let mut key: Vec<String> = others.iter().map(|c| c.value(&r.config)).collect();
        key.push(r.run_id.clone());
        let v = component.value(&r.config);
        let vi = values
            .binary_search_by(|p| value_order(p, &v))
            .expect("value listed");
        contexts
            .entry(key)
            .or_default()
            .insert(vi, idx.iter().map(|&m| r.metrics[m]).collect());
    }
    let k = values.len();
    let mut sums = vec![vec![0.0; k]; k];
    let mut counts = vec![vec![0usize; k]; k];
    for by_value in contexts.values() {
        let var: Vec<f64> = (0..idx.len())
            .map(|m| {
                let col: Vec<f64> = by_value.values().map(|v| v[m]).collect();
                let s = mean_std(&col).1;
                s * s
            })
            .collect();
        let present: Vec<(&usize, &Vec<f64>)> = by_value.iter().collect();
        for (a, (ia, va)) in present.iter().enumerate() {
            for (ib, vb) in &present[a + 1..] {
                let mut acc = 0.0;
                for m in 0..idx.len() {
                    let d2 = (va[m] - vb[m]).powi(2);
                    acc += if normalized {
                        if var[m] > 0.0 {
                            d2 / var[m]
                        } else {
                            0.0
                        }
                    } else {
                        d2
                    };
                }
                let rms = (acc / idx.len() as f64).sqrt();
                sums[**ia][**ib] += rms;
                counts[**ia][**ib] += 1;
            }
        }
    }
    let mut entries = vec![vec![None; k]; k];
    let mut ctx = vec![vec![0usize; k]; k];
    for i in 0..k {
        entries[i][i] = Some(0.0);
        for j in i + 1..k {
            let c = counts[i][j];
            ctx[i][j] = c;
            ctx[j][i] = c;
            if c > 0 {
                let v = sums[i][j] / c as f64;
                entries[i][j] = Some(v);
                entries[j][i] = Some(v);
            }
        }
    }
    Ok(SimilarityMatrix {
        component,
        metrics: metrics.iter().map(|m| m.to_string()).collect(),
        normalized,
        values,
        entries,
        contexts: ctx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartCorrelation {
    pub metric: String,
    /// `(component, value)` per row/column.
    pub parts: Vec<(Component, String)>,
    pub matrix: Vec<Vec<f64>>,
}

impl PartCorrelation {
    pub fn label(&self, i: usize) -> String {
        format!("{}={}", self.parts[i].0, self.parts[i].1)
    }

    fn row_stats(&self) -> Vec<(f64, f64)> {
        self.matrix.iter().map(|r| mean_std(r)).collect()
    }

    fn top_by(&self, k: usize, key: impl Fn((f64, f64)) -> f64) -> Vec<usize> {
        let stats = self.row_stats();
        let mut order: Vec<usize> = (0..self.parts.len()).collect();
        order.sort_by(|&a, &b| key(stats[b]).total_cmp(&key(stats[a])).then(a.cmp(&b)));
        order.truncate(k);
        order
    }

    /// Parts with the largest row mean.
    pub fn top_by_mean(&self, k: usize) -> Vec<usize> {
        self.top_by(k, |s| s.0)
    }

    /// Parts with the largest row standard deviation.
    pub fn top_by_std(&self, k: usize) -> Vec<usize> {
        self.top_by(k, |s| s.1)
    }

    /// Leaf order of an average-linkage clustering on `1 - similarity`.
    pub fn cluster_order(&self) -> Vec<usize> {
        let n = self.parts.len();
        let dist = |i: usize, j: usize| 1.0 - self.matrix[i][j];
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 1);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let mut s = 0.0;
                    for &i in &clusters[a] {
                        for &j in &clusters[b] {
                            s += dist(i, j);
                        }
                    }
                    let d = s / (clusters[a].len() * clusters[b].len()) as f64;
                    if d < best.0 {
                        best = (d, a, b);
                    }
                }
            }
            let (_, a, b) = best;
            let merged = clusters.remove(b);
            clusters[a].extend(merged);
        }
        clusters.pop().unwrap_or_default()
    }
}

/// Uncentered cosine similarity between parts' metric-masked branch
/// vectors. Parts of one component never share a branch, so their entries
/// are 0; parts that never occur, or whose metric is 0 everywhere, are
/// left out.
pub fn part_correlation(table: &MergedTable, metric: &str) -> Result<PartCorrelation> {
    let mi = metric_idx(metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("empty table".into()));
    }
    let mut parts = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for c in Component::PIPELINE {
        for v in table.values_of(c) {
            let vec: Vec<f64> = table
                .rows
                .iter()
                .map(|r| {
                    if c.value(&r.config) == v {
                        r.metrics[mi]
                    } else {
                        0.0
                    }
                })
                .collect();
            if vec.iter().any(|x| *x != 0.0) {
                parts.push((c, v));
                vectors.push(vec);
            }
        }
    }
    let distinct_components = {
        let mut c: Vec<Component> = parts.iter().map(|p| p.0).collect();
        c.dedup();
        c.len()
    };
    if distinct_components < 2 {
        return Err(Error::Analysis(
            "part correlation needs at least 2 components".into(),
        ));
    }
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let n = parts.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        matrix[i][i] = 1.0;
        for j in i + 1..n {
            let s = if parts[i].0 == parts[j].0 {
                0.0
            } else {
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                dot / (norms[i] * norms[j])
            };
            matrix[i][j] = s;
            matrix[j][i] = s;
        }
    }
    Ok(PartCorrelation {
        metric: metric.to_string(),
        parts,
        matrix,
    })
}
