use serde::{Deserialize, Serialize};

use crate::PredictorError;

/// Rotation bins per Euler axis (5 degrees each).
pub const DEFAULT_ROTATION_BINS: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub heatmap: f64,
    pub rotation: f64,
    pub gripper: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            heatmap: 1.0,
            rotation: 1.0,
            gripper: 1.0,
        }
    }
}

/// Shape of the network and its toy encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Side of each canonical view fed to the model.
    pub resolution: usize,
    pub patch: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// Hidden width of the block MLP, as a multiple of `dim`.
    pub mlp_ratio: usize,
    /// Fourier bands of the 3D position embedding.
    pub bands: usize,
    /// Hashed vocabulary of the bag-of-words text encoder.
    pub vocab: usize,
    pub max_words: usize,
    pub rotation_bins: usize,
    /// Width of the Gaussian heatmap targets, in pixels.
    pub sigma: f64,
    pub loss_weights: LossWeights,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            patch: 4,
            dim: 32,
            layers: 2,
            heads: 4,
            mlp_ratio: 2,
            bands: 8,
            vocab: 256,
            max_words: 32,
            rotation_bins: DEFAULT_ROTATION_BINS,
            sigma: 1.5,
            loss_weights: LossWeights::default(),
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |msg: String| Err(PredictorError::Config(msg));
        if self.patch == 0 || self.resolution == 0 || !self.resolution.is_multiple_of(self.patch) {
            return bad(format!("resolution {} is not a multiple of patch {}", self.resolution, self.patch));
        }
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return bad(format!("dim {} is not divisible by {} heads", self.dim, self.heads));
        }
        if self.mlp_ratio == 0 || self.bands == 0 || self.vocab < 2 || self.max_words == 0 {
            return bad("mlp_ratio, bands, max_words must be positive and vocab at least 2".into());
        }
        if self.rotation_bins < 2 {
            return bad(format!("{} rotation bins", self.rotation_bins));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {}", self.sigma));
        }
        let w = self.loss_weights;
        if [w.heatmap, w.rotation, w.gripper].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad(format!("loss weights {w:?}"));
        }
        Ok(())
    }

    pub fn patches_per_side(&self) -> usize {
        self.resolution / self.patch
    }

    /// Image tokens per view.
    pub fn patches_per_view(&self) -> usize {
        self.patches_per_side().pow(2)
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Side of the crop cube around each target keypoint.
    pub cube_side: f64,
    /// Each sample's crop center is offset from its keypoint by a fixed,
    /// seeded uniform jitter of at most this much per axis.
    pub crop_jitter: f64,
    /// Fraction of samples held out for the final pixel-error report.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 192,
            lr: 0.0024,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            cube_side: 0.16,
            crop_jitter: 0.02,
            holdout: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let ok = self.batch_size > 0
            && self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.cube_side > 0.0
            && self.crop_jitter >= 0.0
            && self.crop_jitter < 0.5 * self.cube_side
            && (0.0..1.0).contains(&self.holdout);
        if ok {
            Ok(())
        } else {
            Err(PredictorError::Config(format!("invalid training config {self:?}")))
        }
    }
}
