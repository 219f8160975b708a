use std::fmt::Write as _;

use super::hypothesis::{critical_difference, friedman_test};
use super::stats::{
    aggregate_stats, component_stats, cross_seed_summary, rank_pipelines, seed_blocks,
};
use super::table::{metric_idx, Component, MergedTable, TableRow};
use crate::error::{Error, Result};
use crate::metrics::METRIC_NAMES;
use crate::search_space::{format_fraction, norm_token};

pub const REPORT_SECTIONS: [&str; 5] = [
    "Aggregate statistics",
    "Top 5 pipelines",
    "Component impact",
    "Cross-seed robustness",
    "Friedman test",
];

const TOP: usize = 5;

fn render_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let _ = writeln!(
        out,
        "{}",
        width
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  ")
    );
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
}

fn section(out: &mut String, i: usize) {
    if i > 0 {
        out.push('\n');
    }
    let title = REPORT_SECTIONS[i];
    let _ = writeln!(out, "== {title} ==");
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn class_f1_rows(table: &MergedTable) -> Vec<Vec<String>> {
    let idx = |m: &str| metric_idx(m).expect("known metric");
    let (c0, c1) = (idx("F1_class0"), idx("F1_class1"));
    let mut cand: Vec<(f64, usize, &TableRow)> = Vec::new();
    for r in &table.rows {
        cand.push((r.metrics[c0], 0, r));
        cand.push((r.metrics[c1], 1, r));
    }
    cand.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.2.branch_id.cmp(&b.2.branch_id))
            .then_with(|| a.2.run_id.cmp(&b.2.run_id))
            .then(a.1.cmp(&b.1))
    });
    cand.into_iter()
        .take(TOP)
        .map(|(f1, class, r)| {
            let c = &r.config;
            vec![
                f4(f1),
                class.to_string(),
                r.run_id.clone(),
                c.k.to_string(),
                c.fs_method.to_string(),
                c.scaler.to_string(),
                c.augmentation.to_string(),
                c.imbalance.to_string(),
                c.model.short_id().to_string(),
                f4(r.metrics[idx("Accuracy")]),
                f4(r.metrics[idx("Weighted_F1")]),
                f4(r.metrics[idx("Macro_F1")]),
                norm_token(c.norm_first).to_string(),
                format_fraction(c.split_ratio),
                format_fraction(c.prob_threshold),
                c.seed.to_string(),
            ]
        })
        .collect()
}

/// Plain-text summary of a merged table. The output depends only on the
/// table contents, so regenerating it is byte-stable.
pub fn render_report(table: &MergedTable, metric: &str, lambda: f64, alpha: f64) -> Result<String> {
    let mi = metric_idx(metric)?;
    if table.is_empty() {
        return Err(Error::Analysis("no successful branches to report".into()));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "runs: {}  branches: {}  focus metric: {metric}\n",
        table.run_ids.join(","),
        table.len()
    );

    section(&mut out, 0);
    let mut rows = Vec::new();
    for m in METRIC_NAMES {
        let (mean, std) = match aggregate_stats(table, m) {
            Ok(v) => v,
            Err(_) => (table.rows[0].metrics[metric_idx(m)?], 0.0),
        };
        rows.push(vec![m.to_string(), f4(mean), f4(std)]);
    }
    render_table(&mut out, &["Metric", "Mean", "Std"], &rows);

    section(&mut out, 1);
    let _ = writeln!(out, "-- class-wise F1 --");
    render_table(
        &mut out,
        &[
            "F1", "Class", "RunID", "Feat", "FS", "Sc", "Aug", "Imb", "Model", "Acc", "W-F1",
            "M-F1", "Norm", "Split", "Prob", "Seed",
        ],
        &class_f1_rows(table),
    );
    let _ = writeln!(out, "-- per metric --");
    let mut rows = Vec::new();
    for m in METRIC_NAMES {
        for r in rank_pipelines(table, m, TOP, false)? {
            rows.push(vec![
                m.to_string(),
                r.rank.to_string(),
                f4(r.value),
                r.row.run_id.clone(),
                r.row.logdir.clone(),
            ]);
        }
    }
    render_table(
        &mut out,
        &["Metric", "Rank", "Value", "RunID", "LogDir"],
        &rows,
    );

    section(&mut out, 2);
    let mut rows = Vec::new();
    for c in Component::PIPELINE {
        let s = component_stats(table, c, metric)?;
        let best = s
            .values
            .iter()
            .max_by(|a, b| {
                a.mean
                    .total_cmp(&b.mean)
                    .then_with(|| b.value.cmp(&a.value))
            })
            .expect("non-empty");
        rows.push(vec![
            c.id().to_string(),
            s.values.len().to_string(),
            format!("{:.6}", s.delta),
            format!("{:.6}", s.mean_sigma),
            format!("{:.6}", s.sensitivity),
            best.value.clone(),
        ]);
    }
    render_table(
        &mut out,
        &[
            "Component",
            "Values",
            "Delta",
            "MeanSigma",
            "S",
            "BestValue",
        ],
        &rows,
    );

    section(&mut out, 3);
    let s = cross_seed_summary(table, metric, lambda)?;
    let rows: Vec<Vec<String>> = s
        .models
        .iter()
        .map(|m| {
            let sd = m.std[mi].map(f4).unwrap_or_else(|| "n/a".into());
            vec![
                m.model.id().to_string(),
                format!("{} ± {sd}", f4(m.mean[mi])),
                format!("{:.3}", m.mean_rank),
                format!("{:.3}", m.rank_std),
                format!("{:.3}", m.nrrs),
            ]
        })
        .collect();
    let _ = writeln!(out, "metric {metric}, lambda {lambda}");
    render_table(
        &mut out,
        &["Model", "Mean ± Std", "MeanRank", "RankStd", "NRRS"],
        &rows,
    );

    section(&mut out, 4);
    let line = seed_blocks(table, metric)
        .and_then(|b| b.complete())
        .and_then(|b| friedman_test(&b))
        .and_then(|f| {
            let cd = critical_difference(f.k, f.n_blocks, alpha)?;
            Ok(format!(
                "{metric}: chi2 = {:.4}, p = {:.4e}, k = {}, N = {}, CD(alpha={alpha}) = {:.4}",
                f.chi2, f.p_value, f.k, f.n_blocks, cd
            ))
        });
    match line {
        Ok(l) => {
            let _ = writeln!(out, "{l}");
        }
        Err(e) => {
            let _ = writeln!(out, "{metric}: not applicable ({e})");
        }
    }
    Ok(out)
}
