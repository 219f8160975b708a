use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::ScalerKind;

/// Per-column parameters fit on training rows. For standard scaling
/// `(loc, spread)` is `(mean, population std)`, for minmax `(min, max - min)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScalerKind,
    pub loc: Vec<f64>,
    pub spread: Vec<f64>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.loc.len()
    }
}

pub fn fit_scaler(features: ArrayView2<f64>, method: ScalerKind) -> ScalerParams {
    let n = features.nrows() as f64;
    let mut loc = Vec::with_capacity(features.ncols());
    let mut spread = Vec::with_capacity(features.ncols());
    for col in features.columns() {
        match method {
            ScalerKind::Standard => {
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                loc.push(mean);
                spread.push(var.sqrt());
            }
            ScalerKind::MinMax => {
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                loc.push(lo);
                spread.push(hi - lo);
            }
        }
    }
    ScalerParams {
        method,
        loc,
        spread,
    }
}

pub fn apply_scaler(params: &ScalerParams, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != params.n_features() {
        return Err(Error::stage(
            "apply_scaler",
            format!(
                "fit on {} columns, applied to {}",
                params.n_features(),
                features.ncols()
            ),
        ));
    }
    let mut out = features.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (loc, spread) = (params.loc[j], params.spread[j]);
        if spread > 0.0 {
            col.mapv_inplace(|v| (v - loc) / spread);
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}
