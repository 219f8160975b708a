use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{BinnedMatrix, GrowParams, Grower, Tree};
use crate::rng::stage_rng;

pub(crate) struct CartSettings {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
}

impl CartSettings {
    fn grow_params(&self) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            min_child_weight: 0.0,
            lambda: 0.0,
        }
    }
}

fn mean_over(values: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
    move |rows: &[usize]| rows.iter().map(|&i| values[i]).sum::<f64>() / rows.len() as f64
}

/// A single Gini tree; leaves hold the class-1 frequency.
pub(crate) fn fit_cart(x: ArrayView2<f64>, y: &[u8], s: &CartSettings) -> Tree {
    let bm = BinnedMatrix::new(x, s.max_bins);
    let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let ones = vec![1.0; y.len()];
    let all: Vec<usize> = (0..bm.n_features()).collect();
    let mut importance = vec![0.0; bm.n_features()];
    let leaf = mean_over(&target);
    Grower {
        bm: &bm,
        grad: &target,
        hess: &ones,
        params: &s.grow_params(),
        features: &mut || all.clone(),
        leaf: &leaf,
        importance: &mut importance,
    }
    .grow((0..y.len()).collect())
}

pub(crate) struct ForestSettings {
    pub n_trees: usize,
    pub cart: CartSettings,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Forest {
    pub trees: Vec<Tree>,
    /// Total split gain per feature, summed over trees.
    pub importance: Vec<f64>,
}

impl Forest {
    pub(crate) fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged regression trees on `target`; leaves hold the mean target of
/// their bootstrap rows, so 0/1 targets give class frequencies.
pub(crate) fn fit_forest(
    x: ArrayView2<f64>,
    target: &[f64],
    s: &ForestSettings,
    seed: u64,
    stage: &str,
) -> Forest {
    let n = target.len();
    let bm = BinnedMatrix::new(x, s.cart.max_bins);
    let d = bm.n_features();
    let ones = vec![1.0; n];
    let params = s.cart.grow_params();
    let mtry = s.max_features.unwrap_or(d).clamp(1, d);
    let mut rng = stage_rng(seed, stage);
    let mut importance = vec![0.0; d];
    let leaf = mean_over(target);
    let mut trees = Vec::with_capacity(s.n_trees);
    for _ in 0..s.n_trees {
        let rows: Vec<usize> = if s.bootstrap {
            let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let mut pick = || {
            if mtry == d {
                (0..d).collect()
            } else {
                let mut f = rand::seq::index::sample(&mut rng, d, mtry).into_vec();
                f.sort_unstable();
                f
            }
        };
        trees.push(
            Grower {
                bm: &bm,
                grad: target,
                hess: &ones,
                params: &params,
                features: &mut pick,
                leaf: &leaf,
                importance: &mut importance,
            }
            .grow(rows),
        );
    }
    Forest { trees, importance }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Booster {
    /// First-order: trees split on log-loss residuals, Newton leaf values.
    Gradient,
    /// Second-order: gradient/hessian gain with L2 leaf penalty.
    Newton,
}

pub(crate) struct BoostSettings {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoostedTrees {
    pub init: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first stage and after each stage.
    pub training_loss: Vec<f64>,
}

impl BoostedTrees {
    pub(crate) fn margin(&self, row: ArrayView1<f64>) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logloss(f: f64, y: f64) -> f64 {
    if y > 0.5 {
        softplus(-f)
    } else {
        softplus(f)
    }
}

pub(crate) fn fit_boosted(
    x: ArrayView2<f64>,
    y: &[u8],
    s: &BoostSettings,
    kind: Booster,
) -> BoostedTrees {
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let prior = yf.iter().sum::<f64>() / n as f64;
    let init = (prior / (1.0 - prior)).ln();
    let bm = BinnedMatrix::new(x, s.max_bins);
    let d = bm.n_features();
    let all: Vec<usize> = (0..d).collect();
    let mut f = vec![init; n];
    let mean_loss =
        |f: &[f64]| f.iter().zip(&yf).map(|(a, b)| logloss(*a, *b)).sum::<f64>() / n as f64;
    let mut training_loss = vec![mean_loss(&f)];
    let mut trees = Vec::with_capacity(s.n_estimators);
    let mut importance = vec![0.0; d];
    let params = GrowParams {
        max_depth: s.max_depth,
        min_samples_split: 2,
        min_samples_leaf: s.min_samples_leaf,
        min_child_weight: if kind == Booster::Newton {
            s.min_child_weight
        } else {
            0.0
        },
        lambda: if kind == Booster::Newton {
            s.lambda
        } else {
            0.0
        },
    };
    for _ in 0..s.n_estimators {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let pq: Vec<f64> = p.iter().map(|v| v * (1.0 - v)).collect();
        // residuals y - p; the Newton booster uses the gradient p - y
        let resid: Vec<f64> = yf.iter().zip(&p).map(|(a, b)| a - b).collect();
        let (grad, hess): (Vec<f64>, Vec<f64>) = match kind {
            Booster::Gradient => (resid.clone(), vec![1.0; n]),
            Booster::Newton => (resid.iter().map(|r| -r).collect(), pq.clone()),
        };
        let lambda = params.lambda;
        let newton_leaf = |rows: &[usize]| {
            let num: f64 = rows.iter().map(|&i| resid[i]).sum();
            let den: f64 = rows.iter().map(|&i| pq[i]).sum::<f64>() + lambda;
            if den > 1e-12 {
                num / den
            } else {
                0.0
            }
        };
        let mut tree = Grower {
            bm: &bm,
            grad: &grad,
            hess: &hess,
            params: &params,
            features: &mut || all.clone(),
            leaf: &newton_leaf,
            importance: &mut importance,
        }
        .grow((0..n).collect());
        tree.map_leaves(|v| v * s.learning_rate);

        // Loss is separable across leaves: halve any step that would raise
        // its leaf's loss.
        let leaf_of: Vec<usize> = (0..n).map(|i| tree.leaf_of(&bm, i)).collect();
        let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in leaf_of.iter().enumerate() {
            members.entry(l).or_default().push(i);
        }
        for (&leaf, rows) in &members {
            let before: f64 = rows.iter().map(|&i| logloss(f[i], yf[i])).sum();
            let mut step = tree.leaf_value(leaf);
            let mut tries = 0;
            while rows
                .iter()
                .map(|&i| logloss(f[i] + step, yf[i]))
                .sum::<f64>()
                > before
            {
                step /= 2.0;
                tries += 1;
                if tries == 40 {
                    step = 0.0;
                    break;
                }
            }
            tree.set_leaf_value(leaf, step);
            for &i in rows {
                f[i] += step;
            }
        }
        training_loss.push(mean_loss(&f));
        trees.push(tree);
    }
    BoostedTrees {
        init,
        trees,
        training_loss,
    }
}
