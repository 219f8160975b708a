use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::hypothesis::{critical_difference, friedman_test, wilcoxon_signed_rank};
use super::importance::{rf_importance, ImportanceLevel};
use super::similarity::{part_correlation, rms_value_similarity};
use super::stats::{
    aggregate_stats, component_stats, cross_seed_summary, rank_pipelines, seed_blocks,
};
use super::table::{csv_err, metric_idx, Component, MergedTable};
use crate::error::{Error, Result};
use crate::executor::{config_cells, write_atomic, CONFIG_COLUMNS};
use crate::ident::string_enum;
use crate::metrics::METRIC_NAMES;
use crate::models::ModelKind;

pub const ANALYSIS_DIR: &str = "analysis";

string_enum! {
    pub enum AnalysisKind {
        Aggregate => "aggregate",
        Rank => "rank",
        Component => "component",
        Importance => "importance",
        Rms => "rms",
        Correlation => "correlation",
        Robustness => "robustness",
        Friedman => "friedman",
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub metric: String,
    /// Components for per-component analyses; empty means every pipeline
    /// component.
    pub components: Vec<Component>,
    pub top_n: usize,
    pub lambda: f64,
    pub n_trees: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Log and skip analyses that do not apply to the table (for example a
    /// Friedman test over a single seed) instead of failing.
    pub skip_inapplicable: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            metric: "Macro_F1".into(),
            components: Vec::new(),
            top_n: 10,
            lambda: 1.0,
            n_trees: 100,
            seed: 0,
            alpha: 0.05,
            skip_inapplicable: false,
        }
    }
}

impl AnalysisOptions {
    fn components(&self) -> Vec<Component> {
        if self.components.is_empty() {
            Component::PIPELINE.to_vec()
        } else {
            self.components.clone()
        }
    }
}

type Rows = Vec<Vec<String>>;

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn to_csv(header: &[String], rows: &Rows) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Analysis(format!("csv: {e}")))
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Paired metric values of every model pair over contexts that agree on
/// all other config columns and the run.
pub fn paired_by_model(
    table: &MergedTable,
    metric: &str,
) -> Result<Vec<(ModelKind, ModelKind, Vec<f64>, Vec<f64>)>> {
    let mi = metric_idx(metric)?;
    let mut ctx: BTreeMap<Vec<String>, BTreeMap<ModelKind, f64>> = BTreeMap::new();
    for r in &table.rows {
        let mut key: Vec<String> = Component::ALL
            .iter()
            .filter(|c| **c != Component::Model)
            .map(|c| c.value(&r.config))
            .collect();
        key.push(r.run_id.clone());
        ctx.entry(key)
            .or_default()
            .insert(r.config.model, r.metrics[mi]);
    }
    let mut models: Vec<ModelKind> = table.rows.iter().map(|r| r.config.model).collect();
    models.sort();
    models.dedup();
    let mut out = Vec::new();
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            let (mut xa, mut xb) = (Vec::new(), Vec::new());
            for m in ctx.values() {
                if let (Some(va), Some(vb)) = (m.get(a), m.get(b)) {
                    xa.push(*va);
                    xb.push(*vb);
                }
            }
            out.push((*a, *b, xa, xb));
        }
    }
    Ok(out)
}

fn aggregate(table: &MergedTable) -> Result<Vec<(String, Vec<u8>)>> {
    let mut rows = Rows::new();
    for m in METRIC_NAMES {
        let (mean, std) = aggregate_stats(table, m)?;
        rows.push(vec![
            m.to_string(),
            num(mean),
            num(std),
            table.len().to_string(),
        ]);
    }
    Ok(vec![(
        "aggregate".into(),
        to_csv(&strings(&["Metric", "Mean", "Std", "Rows"]), &rows)?,
    )])
}

fn rank(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let mut header = strings(&["Rank", "Metric", "Value"]);
    header.extend(strings(&CONFIG_COLUMNS));
    let mut rows = Rows::new();
    for r in rank_pipelines(table, &o.metric, o.top_n, false)? {
        let mut row = vec![r.rank.to_string(), o.metric.clone(), num(r.value)];
        row.extend(config_cells(&r.row.run_id, &r.row.config));
        rows.push(row);
    }
    Ok(vec![(
        format!("rank_{}", o.metric),
        to_csv(&header, &rows)?,
    )])
}

fn component(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let header = strings(&[
        "Component",
        "Value",
        "Mean",
        "Std",
        "Support",
        "Delta",
        "MeanSigma",
        "Sensitivity",
    ]);
    let mut rows = Rows::new();
    for c in o.components() {
        let s = component_stats(table, c, &o.metric)?;
        for v in &s.values {
            rows.push(vec![
                c.id().to_string(),
                v.value.clone(),
                num(v.mean),
                num(v.std),
                v.support.to_string(),
                num(s.delta),
                num(s.mean_sigma),
                num(s.sensitivity),
            ]);
        }
    }
    Ok(vec![(
        format!("component_{}", o.metric),
        to_csv(&header, &rows)?,
    )])
}

fn importance(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let mut rows = Rows::new();
    for (level, name) in [
        (ImportanceLevel::Component, "component"),
        (ImportanceLevel::Part, "part"),
    ] {
        let imp = rf_importance(table, &o.metric, level, o.n_trees, o.seed)?;
        for (f, v) in imp.features.iter().zip(&imp.importance) {
            rows.push(vec![name.to_string(), f.clone(), num(*v)]);
        }
    }
    Ok(vec![(
        format!("importance_{}", o.metric),
        to_csv(&strings(&["Level", "Feature", "Importance"]), &rows)?,
    )])
}

fn rms(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let header = strings(&[
        "Component",
        "Normalized",
        "ValueA",
        "ValueB",
        "RMS",
        "Contexts",
    ]);
    let mut rows = Rows::new();
    let metrics: Vec<&str> = METRIC_NAMES.to_vec();
    for c in o.components() {
        if o.skip_inapplicable && table.values_of(c).len() < 2 {
            log::warn!("rms: component {c} has a single value; skipped");
            continue;
        }
        for normalized in [false, true] {
            let m = rms_value_similarity(table, c, &metrics, normalized)?;
            for (i, a) in m.values.iter().enumerate() {
                for (j, b) in m.values.iter().enumerate() {
                    rows.push(vec![
                        c.id().to_string(),
                        normalized.to_string(),
                        a.clone(),
                        b.clone(),
                        opt(m.entries[i][j]),
                        m.contexts[i][j].to_string(),
                    ]);
                }
            }
        }
    }
    Ok(vec![("rms".into(), to_csv(&header, &rows)?)])
}

fn correlation(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let pc = part_correlation(table, &o.metric)?;
    let order = pc.cluster_order();
    let mut header = vec!["Part".to_string()];
    header.extend(order.iter().map(|&j| pc.label(j)));
    let matrix: Rows = order
        .iter()
        .map(|&i| {
            let mut row = vec![pc.label(i)];
            row.extend(order.iter().map(|&j| num(pc.matrix[i][j])));
            row
        })
        .collect();
    let mut views = Rows::new();
    let k = o.top_n.min(pc.parts.len());
    for (view, idx) in [
        ("top_mean", pc.top_by_mean(k)),
        ("top_std", pc.top_by_std(k)),
    ] {
        for (r, i) in idx.into_iter().enumerate() {
            let (mean, std) = super::stats::mean_std(&pc.matrix[i]);
            views.push(vec![
                view.to_string(),
                (r + 1).to_string(),
                pc.label(i),
                num(mean),
                num(std),
            ]);
        }
    }
    Ok(vec![
        (
            format!("correlation_{}", o.metric),
            to_csv(&header, &matrix)?,
        ),
        (
            format!("correlation_views_{}", o.metric),
            to_csv(
                &strings(&["View", "Rank", "Part", "RowMean", "RowStd"]),
                &views,
            )?,
        ),
    ])
}

fn robustness(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let s = cross_seed_summary(table, &o.metric, o.lambda)?;
    let mi = metric_idx(&o.metric)?;
    let models = to_csv(
        &strings(&[
            "Model", "Groups", "Mean", "Std", "MeanRank", "RankStd", "Lambda", "NRRS",
        ]),
        &s.models
            .iter()
            .map(|m| {
                vec![
                    m.model.id().to_string(),
                    m.groups.to_string(),
                    num(m.mean[mi]),
                    opt(m.std[mi]),
                    num(m.mean_rank),
                    num(m.rank_std),
                    num(o.lambda),
                    num(m.nrrs),
                ]
            })
            .collect(),
    )?;
    let mut header: Vec<String> = Component::PIPELINE
        .iter()
        .map(|c| c.id().to_string())
        .collect();
    header.push("Seeds".into());
    for m in METRIC_NAMES {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let groups: Rows = s
        .groups
        .iter()
        .map(|g| {
            let mut row = g.key.clone();
            row.push(g.n_seeds.to_string());
            for k in 0..METRIC_NAMES.len() {
                row.push(num(g.mean[k]));
                row.push(opt(g.std[k]));
            }
            row
        })
        .collect();
    Ok(vec![
        (format!("robustness_{}", o.metric), models),
        ("robustness_groups".into(), to_csv(&header, &groups)?),
    ])
}

fn friedman(table: &MergedTable, o: &AnalysisOptions) -> Result<Vec<(String, Vec<u8>)>> {
    let blocks = seed_blocks(table, &o.metric)?;
    let f = friedman_test(&blocks.complete()?)?;
    let cd = critical_difference(f.k, f.n_blocks, o.alpha)?;
    let rows: Rows = blocks
        .models
        .iter()
        .zip(&f.mean_ranks)
        .map(|(m, r)| {
            vec![
                m.id().to_string(),
                num(*r),
                num(f.chi2),
                num(f.p_value),
                f.n_blocks.to_string(),
                f.k.to_string(),
                num(o.alpha),
                num(cd),
            ]
        })
        .collect();
    let mut out = vec![(
        format!("friedman_{}", o.metric),
        to_csv(
            &strings(&[
                "Model", "MeanRank", "Chi2", "PValue", "Blocks", "K", "Alpha", "CD",
            ]),
            &rows,
        )?,
    )];
    let mut w = Rows::new();
    for (a, b, xa, xb) in paired_by_model(table, &o.metric)? {
        match wilcoxon_signed_rank(&xa, &xb) {
            Ok(r) => w.push(vec![
                a.id().to_string(),
                b.id().to_string(),
                r.n.to_string(),
                num(r.w_plus),
                num(r.w_minus),
                num(r.statistic),
                num(r.p_two_sided),
                r.exact.to_string(),
            ]),
            Err(e) => log::warn!("wilcoxon {a} vs {b}: {e}"),
        }
    }
    out.push((
        format!("wilcoxon_{}", o.metric),
        to_csv(
            &strings(&[
                "ModelA",
                "ModelB",
                "N",
                "WPlus",
                "WMinus",
                "W",
                "PTwoSided",
                "Exact",
            ]),
            &w,
        )?,
    ));
    Ok(out)
}

fn compute(
    kind: AnalysisKind,
    table: &MergedTable,
    o: &AnalysisOptions,
) -> Result<Vec<(String, Vec<u8>)>> {
    match kind {
        AnalysisKind::Aggregate => aggregate(table),
        AnalysisKind::Rank => rank(table, o),
        AnalysisKind::Component => component(table, o),
        AnalysisKind::Importance => importance(table, o),
        AnalysisKind::Rms => rms(table, o),
        AnalysisKind::Correlation => correlation(table, o),
        AnalysisKind::Robustness => robustness(table, o),
        AnalysisKind::Friedman => friedman(table, o),
    }
}

/// Runs `kinds` over `table` and writes one or more `<name>.csv` files per
/// analysis into `out_dir`. Returns the written paths in order.
pub fn write_analyses(
    out_dir: &Path,
    table: &MergedTable,
    kinds: &[AnalysisKind],
    o: &AnalysisOptions,
) -> Result<Vec<PathBuf>> {
    metric_idx(&o.metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("empty table".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for &kind in kinds {
        let files = match compute(kind, table, o) {
            Ok(f) => f,
            Err(Error::Analysis(msg)) if o.skip_inapplicable => {
                log::warn!("{kind}: {msg}; skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        for (name, bytes) in files {
            let path = out_dir.join(format!("{name}.csv"));
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
    }
    Ok(written)
}
