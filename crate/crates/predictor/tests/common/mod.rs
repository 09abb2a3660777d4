#![allow(dead_code)]

use c2f_core::geometry::PointCloud;
use c2f_core::trajectory::{Action, Gripper, TrainingSample};
use c2f_predictor::{Example, ModelConfig, Predictor, TrainConfig};
use ndarray::Array2;
use nalgebra::{UnitQuaternion, Vector3};

/// Gray table lattice plus a colored box centered on `block` (side `s`).
pub fn tabletop(block: Vector3<f64>, s: f64, color: [f64; 3]) -> PointCloud {
    let mut c = PointCloud::default();
    let step = 0.005;
    for i in -60..=60 {
        for j in -60..=60 {
            c.push(Vector3::new(i as f64 * step, j as f64 * step, 0.0), [0.6, 0.6, 0.55], true);
        }
    }
    let n = (s / 0.004).ceil() as i32;
    for i in 0..=n {
        for j in 0..=n {
            let a = -s / 2.0 + s * i as f64 / n as f64;
            let b = -s / 2.0 + s * j as f64 / n as f64;
            let h = s / 2.0;
            for p in [
                Vector3::new(a, b, h),
                Vector3::new(a, b, -h),
                Vector3::new(a, h, b),
                Vector3::new(a, -h, b),
                Vector3::new(h, a, b),
                Vector3::new(-h, a, b),
            ] {
                c.push(block + p, color, true);
            }
        }
    }
    c
}

pub fn sample(keypoint: Vector3<f64>, step: &str, rpy: (f64, f64, f64), close: bool) -> TrainingSample {
    let gripper = if close { Gripper::Closed } else { Gripper::Open };
    TrainingSample {
        obs_index: 0,
        target_index: 1,
        target_keyframe: 0,
        gripper: Gripper::Open,
        previous_step: "the robot is currently at the initial state".into(),
        subtask: 0,
        subtask_plan: vec![step.into()],
        target_step: step.into(),
        object_positions: vec![],
        keypoint,
        action: Action::new(keypoint, UnitQuaternion::from_euler_angles(rpy.0, rpy.1, rpy.2), gripper),
    }
}

/// Small enough for exhaustive finite differences.
pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        resolution: 8,
        patch: 4,
        dim: 8,
        layers: 2,
        heads: 2,
        mlp_ratio: 2,
        bands: 2,
        vocab: 16,
        max_words: 8,
        rotation_bins: 8,
        sigma: 1.0,
        init_seed: 11,
        ..Default::default()
    }
}

pub fn fast_train(lr: f64) -> TrainConfig {
    TrainConfig {
        lr,
        crop_jitter: 0.0,
        holdout: 0.0,
        ..Default::default()
    }
}

/// Central differences over every entry of every tensor. Returns the number
/// of entries checked and the largest relative error per tensor; entries
/// where both gradients are below 1e-6 are compared on that absolute scale.
pub fn gradient_check(p: &mut Predictor, e: &Example) -> (usize, Vec<(String, f64)>) {
    let (_, grads) = p.loss_and_grad(e).unwrap();
    let analytic: Vec<(String, Array2<f64>)> = grads.tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
    let h = 1e-5;
    let floor = 1e-6;
    let mut worst = Vec::new();
    let mut checked = 0;
    for (ti, (name, a)) in analytic.iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        for idx in 0..a.len() {
            let (r, c) = (idx / a.ncols(), idx % a.ncols());
            let orig = p.params.tensors_mut()[ti][[r, c]];
            p.params.tensors_mut()[ti][[r, c]] = orig + h;
            let up = p.loss_of(e).unwrap().total;
            p.params.tensors_mut()[ti][[r, c]] = orig - h;
            let down = p.loss_of(e).unwrap().total;
            p.params.tensors_mut()[ti][[r, c]] = orig;
            let numeric = (up - down) / (2.0 * h);
            let an = a[[r, c]];
            max_rel = max_rel.max((an - numeric).abs() / an.abs().max(numeric.abs()).max(floor));
            checked += 1;
        }
        worst.push((name.clone(), max_rel));
    }
    (checked, worst)
}
