use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use super::sigmoid;
use crate::rng::stage_rng;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub(crate) struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub(crate) fn margin(&self, row: ArrayView1<f64>) -> f64 {
        self.w
            .iter()
            .zip(row.iter())
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.b
    }
}

pub(crate) struct LrSettings {
    pub learning_rate: f64,
    pub max_iter: usize,
    pub l2: f64,
    pub tol: f64,
}

/// Full-batch gradient descent on mean log-loss plus `l2/2 · |w|²`; stops
/// once every gradient component is below `tol`.
pub(crate) fn fit_logistic(x: ArrayView2<f64>, y: &[u8], s: &LrSettings) -> LinearModel {
    let (n, d) = x.dim();
    // column-major copy so each pass runs down contiguous columns
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut w = vec![0.0; d];
    let mut gw = vec![0.0; d];
    let mut b = 0.0;
    let mut resid = vec![0.0; n];
    for _ in 0..s.max_iter {
        resid.fill(b);
        for (col, wj) in cols.iter().zip(&w) {
            for (z, v) in resid.iter_mut().zip(col) {
                *z += wj * v;
            }
        }
        for (r, t) in resid.iter_mut().zip(&yf) {
            *r = sigmoid(*r) - t;
        }
        for ((g, col), wj) in gw.iter_mut().zip(&cols).zip(&w) {
            let dot: f64 = col.iter().zip(&resid).map(|(v, r)| v * r).sum();
            *g = dot / n as f64 + wj * s.l2;
        }
        let gb = resid.iter().sum::<f64>() / n as f64;
        let worst = gw.iter().fold(gb.abs(), |m, v| m.max(v.abs()));
        if worst < s.tol {
            break;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= s.learning_rate * g;
        }
        b -= s.learning_rate * gb;
    }
    LinearModel { w, b }
}

pub(crate) struct SvmSettings {
    pub c: f64,
    pub epochs: usize,
    pub eta0: f64,
}

/// Linear soft-margin SVM by stochastic subgradient descent on
/// `λ/2 |w|² + mean hinge`, `λ = 1/(C n)`, step `η0 / (1 + λ η0 t)`.
pub(crate) fn fit_svm(x: ArrayView2<f64>, y: &[u8], s: &SvmSettings, seed: u64) -> LinearModel {
    let (n, d) = x.dim();
    let lambda = 1.0 / (s.c * n as f64);
    let mut rng = stage_rng(seed, "sklearn_SVM");
    let mut order: Vec<usize> = (0..n).collect();
    // w is held as scale * v so the per-step shrink is O(1)
    let mut v = vec![0.0; d];
    let mut scale = 1.0;
    let mut b = 0.0;
    let mut t = 0.0;
    for _ in 0..s.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = s.eta0 / (1.0 + lambda * s.eta0 * t);
            t += 1.0;
            let yi = if y[i] == 1 { 1.0 } else { -1.0 };
            let row = x.row(i);
            let m = scale * v.iter().zip(row.iter()).map(|(a, x)| a * x).sum::<f64>() + b;
            scale *= 1.0 - eta * lambda;
            if yi * m < 1.0 {
                let step = eta * yi / scale;
                for (vj, x) in v.iter_mut().zip(row.iter()) {
                    *vj += step * x;
                }
                b += eta * yi;
            }
            if scale < 1e-9 {
                for vj in v.iter_mut() {
                    *vj *= scale;
                }
                scale = 1.0;
            }
        }
    }
    let w = v.iter().map(|vj| vj * scale).collect();
    LinearModel { w, b }
}
