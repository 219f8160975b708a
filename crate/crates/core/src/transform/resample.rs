//! Training-set augmentation and class rebalancing.

use ndarray::{Array2, ArrayView2};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::neighbors::{k_nearest, sq_dist_slice};
use crate::error::{Error, Result};
use crate::rng::stage_rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassProvenance {
    pub original: usize,
    pub synthetic: usize,
    pub removed: usize,
}

impl ClassProvenance {
    pub fn output(&self) -> usize {
        self.original - self.removed + self.synthetic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    /// Indexed by class label.
    pub provenance: [ClassProvenance; 2],
}

impl ResampleResult {
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&v| v == 1).count();
        [self.labels.len() - ones, ones]
    }

    fn reconciles(&self) -> bool {
        let c = self.class_counts();
        c[0] == self.provenance[0].output()
            && c[1] == self.provenance[1].output()
            && self.features.nrows() == self.labels.len()
    }
}

fn counts(y: &[u8]) -> [usize; 2] {
    let ones = y.iter().filter(|&&v| v == 1).count();
    [y.len() - ones, ones]
}

fn originals(y: &[u8]) -> [ClassProvenance; 2] {
    let c = counts(y);
    [0, 1].map(|k| ClassProvenance {
        original: c[k],
        ..Default::default()
    })
}

fn check_shapes(x: ArrayView2<f64>, y: &[u8], stage: &str) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::stage(stage, "feature and label lengths differ"));
    }
    if x.nrows() == 0 {
        return Err(Error::stage(stage, "empty training set"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::stage(stage, "labels must be 0 or 1"));
    }
    Ok(())
}

/// Original rows followed by the synthetic ones.
fn append(
    x: ArrayView2<f64>,
    y: &[u8],
    extra: Vec<f64>,
    extra_labels: Vec<u8>,
) -> (Array2<f64>, Vec<u8>) {
    let d = x.ncols();
    let mut data: Vec<f64> = x.iter().cloned().collect();
    data.extend(extra);
    let mut labels = y.to_vec();
    labels.extend(extra_labels);
    let n = labels.len();
    (
        Array2::from_shape_vec((n, d), data).expect("row-major buffer"),
        labels,
    )
}

fn keep_rows(x: ArrayView2<f64>, y: &[u8], keep: &[bool]) -> (Array2<f64>, Vec<u8>) {
    let idx: Vec<usize> = (0..y.len()).filter(|&i| keep[i]).collect();
    let out = x.select(ndarray::Axis(0), &idx);
    (out, idx.iter().map(|&i| y[i]).collect())
}

fn finish(
    features: Array2<f64>,
    labels: Vec<u8>,
    provenance: [ClassProvenance; 2],
) -> ResampleResult {
    let r = ResampleResult {
        features,
        labels,
        provenance,
    };
    debug_assert!(r.reconciles());
    r
}

pub fn gaussian_noise(
    x: ArrayView2<f64>,
    y: &[u8],
    noise_scale: f64,
    seed: u64,
) -> Result<ResampleResult> {
    check_shapes(x, y, "gaussian_noise")?;
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::stage(
            "gaussian_noise",
            "noise_scale must be finite and non-negative",
        ));
    }
    let n = x.nrows() as f64;
    let sd: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt() * noise_scale
        })
        .collect();
    let mut rng = stage_rng(seed, "gaussian_noise");
    let mut extra = Vec::with_capacity(x.len());
    for row in x.rows() {
        for (v, s) in row.iter().zip(&sd) {
            let z: f64 = StandardNormal.sample(&mut rng);
            extra.push(v + s * z);
        }
    }
    let mut prov = originals(y);
    for p in prov.iter_mut() {
        p.synthetic = p.original;
    }
    let (f, l) = append(x, y, extra, y.to_vec());
    Ok(finish(f, l, prov))
}

/// `lambda * a + (1 - lambda) * b`, coordinate-wise.
pub fn mix_rows(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(u, v)| lambda * u + (1.0 - lambda) * v)
        .collect()
}

/// Intra-class mixup: one synthetic row per original row, mixed with a
/// different member of the same class.
pub fn mixup(x: ArrayView2<f64>, y: &[u8], alpha: f64, seed: u64) -> Result<ResampleResult> {
    check_shapes(x, y, "mixup")?;
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::stage("mixup", format!("alpha = {alpha}: {e}")))?;
    let members: [Vec<usize>; 2] = [0u8, 1].map(|c| (0..y.len()).filter(|&i| y[i] == c).collect());
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            return Err(Error::stage(
                "mixup",
                format!("class {c} has {} member(s), need 2", m.len()),
            ));
        }
    }
    let mut rng = stage_rng(seed, "mixup");
    let mut extra = Vec::with_capacity(x.len());
    for i in 0..y.len() {
        let pool = &members[usize::from(y[i])];
        let j = loop {
            let j = pool[rng.random_range(0..pool.len())];
            if j != i {
                break j;
            }
        };
        let lambda: f64 = beta.sample(&mut rng);
        let xi = x.row(i).to_vec();
        let xj = x.row(j).to_vec();
        extra.extend(mix_rows(&xi, &xj, lambda));
    }
    let mut prov = originals(y);
    for p in prov.iter_mut() {
        p.synthetic = p.original;
    }
    let (f, l) = append(x, y, extra, y.to_vec());
    Ok(finish(f, l, prov))
}

struct Minority {
    class: u8,
    idx: Vec<usize>,
    deficit: usize,
}

fn minority(y: &[u8], stage: &str) -> Result<Minority> {
    let c = counts(y);
    let class = if c[1] <= c[0] { 1u8 } else { 0u8 };
    let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
    if idx.len() < 2 {
        return Err(Error::stage(
            stage,
            format!("minority class has {} member(s), need 2", idx.len()),
        ));
    }
    Ok(Minority {
        class,
        idx,
        deficit: c[0].abs_diff(c[1]),
    })
}

fn interpolate(x: ArrayView2<f64>, base: usize, nn: usize, u: f64, out: &mut Vec<f64>) {
    for (a, b) in x.row(base).iter().zip(x.row(nn).iter()) {
        out.push(a + u * (b - a));
    }
}

pub fn smote(
    x: ArrayView2<f64>,
    y: &[u8],
    k_neighbors: usize,
    seed: u64,
) -> Result<ResampleResult> {
    check_shapes(x, y, "SMOTE")?;
    let min = minority(y, "SMOTE")?;
    let prov = originals(y);
    if min.deficit == 0 {
        return Ok(finish(x.to_owned(), y.to_vec(), prov));
    }
    let k_eff = k_neighbors.max(1).min(min.idx.len() - 1);
    let nbrs: Vec<Vec<usize>> = min
        .idx
        .iter()
        .map(|&i| k_nearest(x, i, &min.idx, k_eff))
        .collect();
    let mut rng = stage_rng(seed, "SMOTE");
    let mut extra = Vec::with_capacity(min.deficit * x.ncols());
    for _ in 0..min.deficit {
        let b = rng.random_range(0..min.idx.len());
        let nn = *nbrs[b].choose(&mut rng).expect("k_eff >= 1");
        let u: f64 = rng.random();
        interpolate(x, min.idx[b], nn, u, &mut extra);
    }
    let mut prov = prov;
    prov[usize::from(min.class)].synthetic = min.deficit;
    let (f, l) = append(x, y, extra, vec![min.class; min.deficit]);
    Ok(finish(f, l, prov))
}

/// Per-minority-row difficulty weights `r_i` (majority share among the `k`
/// nearest neighbours in the full set), in minority row order.
pub fn adasyn_weights(x: ArrayView2<f64>, y: &[u8], k_neighbors: usize) -> Result<Vec<f64>> {
    let min = minority(y, "ADASYN")?;
    let all: Vec<usize> = (0..y.len()).collect();
    let k_eff = k_neighbors.max(1).min(y.len() - 1);
    Ok(min
        .idx
        .iter()
        .map(|&i| {
            let nn = k_nearest(x, i, &all, k_eff);
            nn.iter().filter(|&&j| y[j] != min.class).count() as f64 / k_eff as f64
        })
        .collect())
}

pub fn adasyn(
    x: ArrayView2<f64>,
    y: &[u8],
    k_neighbors: usize,
    seed: u64,
) -> Result<ResampleResult> {
    check_shapes(x, y, "ADASYN")?;
    let min = minority(y, "ADASYN")?;
    let mut prov = originals(y);
    if min.deficit == 0 {
        return Ok(finish(x.to_owned(), y.to_vec(), prov));
    }
    let r = adasyn_weights(x, y, k_neighbors)?;
    let total: f64 = r.iter().sum();
    let m = min.idx.len();
    let g = min.deficit as f64;
    let alloc: Vec<usize> = r
        .iter()
        .map(|&ri| {
            let share = if total > 0.0 {
                ri / total
            } else {
                1.0 / m as f64
            };
            (g * share).round() as usize
        })
        .collect();
    let k_eff = k_neighbors.max(1).min(m - 1);
    let mut rng = stage_rng(seed, "ADASYN");
    let mut extra = Vec::new();
    let mut made = 0;
    for (pos, &i) in min.idx.iter().enumerate() {
        if alloc[pos] == 0 {
            continue;
        }
        let nbrs = k_nearest(x, i, &min.idx, k_eff);
        for _ in 0..alloc[pos] {
            let nn = *nbrs.choose(&mut rng).expect("k_eff >= 1");
            let u: f64 = rng.random();
            interpolate(x, i, nn, u, &mut extra);
            made += 1;
        }
    }
    prov[usize::from(min.class)].synthetic = made;
    let (f, l) = append(x, y, extra, vec![min.class; made]);
    Ok(finish(f, l, prov))
}

pub fn random_undersample(x: ArrayView2<f64>, y: &[u8], seed: u64) -> Result<ResampleResult> {
    check_shapes(x, y, "RandomUnderSampler")?;
    let c = counts(y);
    if c[0] == 0 || c[1] == 0 {
        return Err(Error::stage(
            "RandomUnderSampler",
            "both classes must be present",
        ));
    }
    let mut prov = originals(y);
    if c[0] == c[1] {
        return Ok(finish(x.to_owned(), y.to_vec(), prov));
    }
    let major = if c[0] > c[1] { 0u8 } else { 1u8 };
    let target = c[0].min(c[1]);
    let major_idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == major).collect();
    let mut rng = stage_rng(seed, "RandomUnderSampler");
    let chosen = rand::seq::index::sample(&mut rng, major_idx.len(), target);
    let mut keep: Vec<bool> = y.iter().map(|&v| v != major).collect();
    for p in chosen.iter() {
        keep[major_idx[p]] = true;
    }
    prov[usize::from(major)].removed = major_idx.len() - target;
    let (f, l) = keep_rows(x, y, &keep);
    Ok(finish(f, l, prov))
}

/// Index pairs `(a, b)`, `a < b`, of opposite-class mutual nearest neighbours.
pub fn tomek_pairs(x: ArrayView2<f64>, y: &[u8]) -> Vec<(usize, usize)> {
    let n = y.len();
    let d = x.ncols();
    let xs = x.as_standard_layout();
    let data = xs.as_slice().expect("standard layout");
    let row = |i: usize| &data[i * d..(i + 1) * d];
    // each pair is measured once; candidates still arrive in ascending
    // index order for every row, so ties keep the lower index
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    for i in 0..n {
        for j in i + 1..n {
            let dist = sq_dist_slice(row(i), row(j));
            if best[i].is_none_or(|(bd, _)| dist < bd) {
                best[i] = Some((dist, j));
            }
            if best[j].is_none_or(|(bd, _)| dist < bd) {
                best[j] = Some((dist, i));
            }
        }
    }
    let nn: Vec<Option<usize>> = best.iter().map(|b| b.map(|(_, j)| j)).collect();
    (0..n)
        .filter_map(|a| {
            let b = nn[a]?;
            (a < b && y[a] != y[b] && nn[b] == Some(a)).then_some((a, b))
        })
        .collect()
}

pub fn tomek_links(x: ArrayView2<f64>, y: &[u8]) -> Result<ResampleResult> {
    check_shapes(x, y, "TomekLinks")?;
    let c = counts(y);
    if c[0] == 0 || c[1] == 0 {
        return Err(Error::stage("TomekLinks", "both classes must be present"));
    }
    // equal counts: class 0 is treated as the majority
    let major = if c[1] > c[0] { 1u8 } else { 0u8 };
    let mut keep = vec![true; y.len()];
    let mut removed = 0;
    for (a, b) in tomek_pairs(x, y) {
        let victim = if y[a] == major { a } else { b };
        if keep[victim] {
            keep[victim] = false;
            removed += 1;
        }
    }
    let mut prov = originals(y);
    prov[usize::from(major)].removed = removed;
    let (f, l) = keep_rows(x, y, &keep);
    Ok(finish(f, l, prov))
}
