use std::sync::Mutex;

use c2f_core::bench::{BenchError, Executor, StepContext};
use c2f_core::heatmap::{refine_keypoint, CoarseToFineConfig, Heatmap, HeatmapError};
use c2f_core::geometry::ViewSet;
use c2f_core::trajectory::{Action, Gripper};
use rand_chacha::ChaCha8Rng;

use crate::data::bins_to_rotation;
use crate::{Prediction, Predictor};

/// Runs the predictor on the crop around the planner's keypoint and decodes
/// its heatmaps over the cropped cloud plus a candidate grid.
#[derive(Debug)]
pub struct TrainedExecutor {
    pub predictor: Predictor,
    pub refine: CoarseToFineConfig,
}

impl TrainedExecutor {
    pub fn new(predictor: Predictor, cube_side: f64, grid_step: f64) -> Self {
        let refine = CoarseToFineConfig {
            cube_side,
            resolution: predictor.config.resolution,
            grid_step: Some(grid_step),
            ..Default::default()
        };
        Self { predictor, refine }
    }
}

impl Executor for TrainedExecutor {
    fn act(&self, ctx: &StepContext, _rng: &mut ChaCha8Rng) -> Result<Action, BenchError> {
        let gripper = ctx.gripper.as_f64();
        let last: Mutex<Option<Prediction>> = Mutex::new(None);
        let stage = |views: &ViewSet| -> Result<[Heatmap; 3], HeatmapError> {
            let pred = self
                .predictor
                .predict_views(views, ctx.instruction, gripper)
                .map_err(|e| HeatmapError::FineStage(e.to_string()))?;
            let heat = pred.heatmaps(self.predictor.config.resolution);
            *last.lock().expect("single caller") = Some(pred);
            Ok(heat)
        };
        let refined = refine_keypoint(ctx.cloud, &ctx.keypoint, &stage, &self.refine)
            .map_err(|e| BenchError::Executor(e.to_string()))?;
        let pred = last
            .into_inner()
            .expect("single caller")
            .ok_or_else(|| BenchError::Executor("fine stage did not run".into()))?;
        let orientation = bins_to_rotation(pred.rotation_bins(), self.predictor.config.rotation_bins);
        let command = if pred.grip_logit > 0.0 { Gripper::Closed } else { Gripper::Open };
        Ok(Action::new(refined.fine.position, orientation, command))
    }
}
