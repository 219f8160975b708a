//! Information-gain feature ranking.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::FsMethod;

pub(crate) fn entropy2(pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

fn label_entropy(y: &[u8]) -> f64 {
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    entropy2(pos, y.len() as f64)
}

/// Bin index per sample: one bin per distinct value when there are at most
/// `bins` of them, otherwise equal-frequency cut points taken from the
/// sorted sample.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let bins = bins.max(1);
    let edges: Vec<f64> = if distinct.len() <= bins {
        distinct[1..].to_vec()
    } else {
        let n = sorted.len();
        let mut e: Vec<f64> = (1..bins).map(|i| sorted[i * n / bins]).collect();
        e.dedup();
        // a cut equal to the minimum would leave bin 0 empty
        e.retain(|v| *v > sorted[0]);
        e
    };
    x.iter()
        .map(|v| edges.partition_point(|e| *e <= *v))
        .collect()
}

/// IG(Y; binned x) in bits.
pub fn information_gain(x: &[f64], y: &[u8], bins: usize) -> f64 {
    assert_eq!(x.len(), y.len(), "information_gain: length mismatch");
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let hy = label_entropy(y);
    let codes = equal_frequency_bins(x, bins);
    let n_bins = codes.iter().max().map_or(0, |m| m + 1);
    let mut count = vec![0usize; n_bins];
    let mut pos = vec![0usize; n_bins];
    for (&b, &label) in codes.iter().zip(y) {
        count[b] += 1;
        pos[b] += usize::from(label);
    }
    let conditional: f64 = count
        .iter()
        .zip(&pos)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, &p)| c as f64 / n as f64 * entropy2(p as f64, c as f64))
        .sum();
    let ig = (hy - conditional).clamp(0.0, hy);
    debug_assert!((0.0..=hy + 1e-12).contains(&ig));
    ig
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryIgMode {
    Max,
    Mean,
}

/// IG of the indicator `[x > t]` for every midpoint `t` between consecutive
/// distinct values, reduced by max or mean.
pub fn binary_infgain(x: &[f64], y: &[u8], mode: BinaryIgMode) -> f64 {
    assert_eq!(x.len(), y.len(), "binary_infgain: length mismatch");
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let total_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let hy = entropy2(total_pos, n as f64);
    let nf = n as f64;

    let mut gains = Vec::new();
    let mut left_n = 0.0;
    let mut left_pos = 0.0;
    for w in 0..n {
        let i = order[w];
        left_n += 1.0;
        left_pos += f64::from(y[i]);
        let boundary = w + 1 < n && x[order[w + 1]] > x[i];
        if boundary {
            let right_n = nf - left_n;
            let right_pos = total_pos - left_pos;
            let cond = left_n / nf * entropy2(left_pos, left_n)
                + right_n / nf * entropy2(right_pos, right_n);
            gains.push((hy - cond).clamp(0.0, hy));
        }
    }
    if gains.is_empty() {
        return 0.0;
    }
    match mode {
        BinaryIgMode::Max => gains.iter().cloned().fold(0.0, f64::max),
        BinaryIgMode::Mean => gains.iter().sum::<f64>() / gains.len() as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// One score per input column (bits).
    pub scores: Vec<f64>,
    /// Top-k columns by descending score, ties by ascending index.
    pub selected: Vec<usize>,
}

impl FeatureRanking {
    /// Selected columns in ascending index order; the processed matrices use
    /// this order so the data depends only on which columns were chosen.
    pub fn projection(&self) -> Vec<usize> {
        let mut cols = self.selected.clone();
        cols.sort_unstable();
        cols
    }
}

pub fn score_column(x: ArrayView1<f64>, y: &[u8], method: FsMethod, bins: usize) -> f64 {
    let col = x.to_vec();
    match method {
        FsMethod::InfGain => information_gain(&col, y, bins),
        FsMethod::BiMaxInfGain => binary_infgain(&col, y, BinaryIgMode::Max),
        FsMethod::BiMeanInfGain => binary_infgain(&col, y, BinaryIgMode::Mean),
        FsMethod::NoSelect => 0.0,
    }
}

/// Ranks training columns; `k` is ignored for noSelect, which keeps every
/// column in original order.
pub fn select_features(
    features: ndarray::ArrayView2<f64>,
    labels: &[u8],
    method: FsMethod,
    k: usize,
    bins: usize,
) -> Result<FeatureRanking> {
    let d = features.ncols();
    if method == FsMethod::NoSelect {
        return Ok(FeatureRanking {
            scores: vec![0.0; d],
            selected: (0..d).collect(),
        });
    }
    if k == 0 || k > d {
        return Err(Error::stage(
            "select_features",
            format!("k = {k} outside [1, {d}]"),
        ));
    }
    let scores: Vec<f64> = features
        .columns()
        .into_iter()
        .map(|c| score_column(c, labels, method, bins))
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(FeatureRanking {
        scores,
        selected: order,
    })
}
