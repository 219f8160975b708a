//! Per-class and aggregate classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Merged-CSV metric columns, in order.
pub const METRIC_NAMES: [&str; 13] = [
    "Accuracy",
    "Macro_Precision",
    "Macro_Recall",
    "Macro_F1",
    "Weighted_Precision",
    "Weighted_Recall",
    "Weighted_F1",
    "Micro_Precision",
    "Micro_Recall",
    "Micro_F1",
    "Integrated_Score",
    "F1_class0",
    "F1_class1",
];

/// The ten aggregates averaged into the integrated score.
pub const BASE_METRICS: [&str; 10] = [
    "Accuracy",
    "Macro_Precision",
    "Macro_Recall",
    "Macro_F1",
    "Weighted_Precision",
    "Weighted_Recall",
    "Weighted_F1",
    "Micro_Precision",
    "Micro_Recall",
    "Micro_F1",
];

pub fn metric_index(name: &str) -> Option<usize> {
    METRIC_NAMES.iter().position(|m| *m == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub tn: Vec<u64>,
    pub support: Vec<u64>,
    pub total: u64,
}

impl ConfusionCounts {
    pub fn n_classes(&self) -> usize {
        self.support.len()
    }

    pub fn correct(&self) -> u64 {
        self.tp.iter().sum()
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8], n_classes: usize) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Metric("no predictions to score".into()));
    }
    if let Some(bad) = y_true
        .iter()
        .chain(y_pred)
        .find(|&&l| usize::from(l) >= n_classes)
    {
        return Err(Error::Metric(format!(
            "label {bad} outside [0, {n_classes})"
        )));
    }
    let mut counts = ConfusionCounts {
        tp: vec![0; n_classes],
        fp: vec![0; n_classes],
        fn_: vec![0; n_classes],
        tn: vec![0; n_classes],
        support: vec![0; n_classes],
        total: y_true.len() as u64,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let (t, p) = (usize::from(t), usize::from(p));
        counts.support[t] += 1;
        if t == p {
            counts.tp[t] += 1;
        } else {
            counts.fn_[t] += 1;
            counts.fp[p] += 1;
        }
    }
    for c in 0..n_classes {
        counts.tn[c] = counts.total - counts.tp[c] - counts.fp[c] - counts.fn_[c];
    }
    Ok(counts)
}

/// 0/0 is defined as 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub integrated_score: f64,
    pub class_precision: Vec<f64>,
    pub class_recall: Vec<f64>,
    pub class_f1: Vec<f64>,
}

impl MetricReport {
    pub fn base_values(&self) -> [f64; 10] {
        [
            self.accuracy,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.weighted_precision,
            self.weighted_recall,
            self.weighted_f1,
            self.micro_precision,
            self.micro_recall,
            self.micro_f1,
        ]
    }

    /// Values in `METRIC_NAMES` order. Missing per-class entries read as 0.
    pub fn values(&self) -> [f64; 13] {
        let b = self.base_values();
        [
            b[0],
            b[1],
            b[2],
            b[3],
            b[4],
            b[5],
            b[6],
            b[7],
            b[8],
            b[9],
            self.integrated_score,
            self.class_f1.first().copied().unwrap_or(0.0),
            self.class_f1.get(1).copied().unwrap_or(0.0),
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        metric_index(name).map(|i| self.values()[i])
    }
}

pub fn metric_report(counts: &ConfusionCounts) -> Result<MetricReport> {
    if counts.total == 0 {
        return Err(Error::Metric("cannot score zero samples".into()));
    }
    let k = counts.n_classes();
    let n = counts.total as f64;
    let mut class_precision = Vec::with_capacity(k);
    let mut class_recall = Vec::with_capacity(k);
    let mut class_f1 = Vec::with_capacity(k);
    for c in 0..k {
        let tp = counts.tp[c] as f64;
        let p = ratio(tp, tp + counts.fp[c] as f64);
        let r = ratio(tp, tp + counts.fn_[c] as f64);
        class_precision.push(p);
        class_recall.push(r);
        class_f1.push(f1(p, r));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    let weighted = |v: &[f64]| {
        v.iter()
            .zip(&counts.support)
            .map(|(x, &s)| x * s as f64)
            .sum::<f64>()
            / n
    };
    let tp: u64 = counts.tp.iter().sum();
    let fp: u64 = counts.fp.iter().sum();
    let fn_: u64 = counts.fn_.iter().sum();
    let micro_precision = ratio(tp as f64, (tp + fp) as f64);
    let micro_recall = ratio(tp as f64, (tp + fn_) as f64);

    let mut report = MetricReport {
        accuracy: counts.correct() as f64 / n,
        macro_precision: mean(&class_precision),
        macro_recall: mean(&class_recall),
        macro_f1: mean(&class_f1),
        weighted_precision: weighted(&class_precision),
        weighted_recall: weighted(&class_recall),
        weighted_f1: weighted(&class_f1),
        micro_precision,
        micro_recall,
        micro_f1: f1(micro_precision, micro_recall),
        integrated_score: 0.0,
        class_precision,
        class_recall,
        class_f1,
    };
    report.integrated_score = integrated_score(&report);
    Ok(report)
}

/// Unweighted mean of the ten base aggregates.
pub fn integrated_score(report: &MetricReport) -> f64 {
    report.base_values().iter().sum::<f64>() / 10.0
}

/// Convenience: confusion counts then report, for binary labels.
pub fn score_binary(y_true: &[u8], y_pred: &[u8]) -> Result<MetricReport> {
    metric_report(&confusion(y_true, y_pred, 2)?)
}
