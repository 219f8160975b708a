//! Data-side pipeline components: feature selection, scaling, augmentation
//! and class rebalancing. All of them fit on training rows only.

mod neighbors;
pub mod resample;
pub mod scaling;
pub mod selection;

use serde::{Deserialize, Serialize};

pub use resample::{
    adasyn, adasyn_weights, gaussian_noise, mix_rows, mixup, random_undersample, smote,
    tomek_links, tomek_pairs, ClassProvenance, ResampleResult,
};
pub use scaling::{apply_scaler, fit_scaler, ScalerParams};
pub use selection::{
    binary_infgain, equal_frequency_bins, information_gain, select_features, BinaryIgMode,
    FeatureRanking,
};

/// Tunables shared by every branch of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSettings {
    pub ig_bins: usize,
    pub noise_scale: f64,
    pub mixup_alpha: f64,
    pub smote_k: usize,
    pub adasyn_k: usize,
}

impl Default for TransformSettings {
    fn default() -> Self {
        Self {
            ig_bins: 10,
            noise_scale: 0.05,
            mixup_alpha: 0.4,
            smote_k: 5,
            adasyn_k: 5,
        }
    }
}

impl TransformSettings {
    pub fn validate(&self) -> crate::error::Result<()> {
        use crate::error::Error;
        if self.ig_bins == 0 {
            return Err(Error::config("transform", "ig_bins must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config(
                "transform",
                "noise_scale must be finite and non-negative",
            ));
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::config("transform", "mixup_alpha must be positive"));
        }
        if self.smote_k == 0 || self.adasyn_k == 0 {
            return Err(Error::config(
                "transform",
                "neighbour counts must be positive",
            ));
        }
        Ok(())
    }
}
