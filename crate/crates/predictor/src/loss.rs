use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::{sigmoid, softmax, Prediction, PredictionGrad};
use crate::LossWeights;

/// What the predictor should output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    /// Normalized heatmaps, row-major per view.
    pub heatmaps: [Vec<f64>; 3],
    pub rotation_bins: [usize; 3],
    /// 1 for closed, 0 for open.
    pub gripper: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Mean cross-entropy over the three views.
    pub heatmap: f64,
    /// Mean cross-entropy over the three Euler axes.
    pub rotation: f64,
    pub gripper: f64,
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Cross-entropy of `target` against softmax(`logits`). Zero-probability
/// target entries contribute nothing, so `-inf` logits are allowed there.
pub fn cross_entropy(logits: &[f64], target: &[f64]) -> f64 {
    let lse = log_sum_exp(logits);
    -logits
        .iter()
        .zip(target)
        .filter(|(_, t)| **t > 0.0)
        .map(|(l, t)| t * (l - lse))
        .sum::<f64>()
}

/// Binary cross-entropy with logits, stable for large |z|.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Weighted loss and its gradient with respect to the prediction.
pub fn loss(pred: &Prediction, target: &Target, w: &LossWeights) -> (LossParts, PredictionGrad) {
    let mut heatmap = 0.0;
    let heat_logits = [0, 1, 2].map(|v| {
        heatmap += cross_entropy(&pred.heat_logits[v], &target.heatmaps[v]) / 3.0;
        let p = softmax(&pred.heat_logits[v]);
        p.iter()
            .zip(&target.heatmaps[v])
            .map(|(p, t)| w.heatmap / 3.0 * (p - t))
            .collect()
    });
    let bins = pred.rot_logits.ncols();
    let mut rotation = 0.0;
    let mut rot_logits = Array2::zeros((3, bins));
    for a in 0..3 {
        let row = pred.rot_logits.row(a).to_vec();
        let mut onehot = vec![0.0; bins];
        onehot[target.rotation_bins[a]] = 1.0;
        rotation += cross_entropy(&row, &onehot) / 3.0;
        for (i, p) in softmax(&row).into_iter().enumerate() {
            rot_logits[[a, i]] = w.rotation / 3.0 * (p - onehot[i]);
        }
    }
    let gripper = bce_with_logits(pred.grip_logit, target.gripper);
    let grip_logit = w.gripper * (sigmoid(pred.grip_logit) - target.gripper);
    let parts = LossParts {
        total: w.heatmap * heatmap + w.rotation * rotation + w.gripper * gripper,
        heatmap,
        rotation,
        gripper,
    };
    (
        parts,
        PredictionGrad {
            heat_logits,
            rot_logits,
            grip_logit,
        },
    )
}
