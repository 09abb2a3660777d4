//! Toy fine-stage action predictor. Three crop views, a step instruction
//! and the gripper state go in; per-view translation heatmaps, Euler
//! rotation bins and a gripper logit come out.

mod checkpoint;
mod config;
pub mod data;
mod encoders;
mod executor;
mod loss;
pub mod model;
mod params;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_KIND, CHECKPOINT_VERSION};
pub use config::{LossWeights, ModelConfig, TrainConfig, DEFAULT_ROTATION_BINS};
pub use data::{prepare_example, Example};
pub use encoders::{
    encode_observation, position_embedding, BagOfWords, DepthPatches, Encoders, Features, FourierPosition, PatchEncoder,
    RgbPatches, TextEncoder,
};
pub use executor::TrainedExecutor;
pub use loss::{bce_with_logits, cross_entropy, loss, LossParts, Target};
pub use model::{Prediction, PredictionGrad};
pub use params::{Adam, BlockParams, Grads, Params};
pub use train::{evaluate_examples, train, EvalStats, TrainReport, Trainer};

use c2f_core::format::FormatError;
use c2f_core::geometry::{GeometryError, ViewSet, WorkspaceBounds};
use c2f_core::heatmap::HeatmapError;
use c2f_core::trajectory::TrajectoryError;
use nalgebra::Vector3;

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("target keypoint {keypoint:?} lies outside the crop {crop:?}")]
    TargetOutside { keypoint: Vector3<f64>, crop: WorkspaceBounds },
    #[error("no usable training samples")]
    EmptyDataset,
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64, last_good: Box<Params> },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Heatmap(#[from] HeatmapError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Weights, their config and the encoders that feed them.
#[derive(Debug)]
pub struct Predictor {
    pub config: ModelConfig,
    pub params: Params,
    pub encoders: Encoders,
}

impl Predictor {
    /// Fresh seeded weights behind the toy encoders.
    pub fn new(config: ModelConfig) -> Result<Self, PredictorError> {
        let encoders = Encoders::toy(&config);
        Self::with_encoders(config, encoders)
    }

    pub fn with_encoders(config: ModelConfig, encoders: Encoders) -> Result<Self, PredictorError> {
        config.validate()?;
        encoders.check(&config)?;
        let params = Params::init(&config, encoders.feature_dims());
        Ok(Self {
            config,
            params,
            encoders,
        })
    }

    pub fn encode(&self, views: &ViewSet, instruction: &str, gripper: f64) -> Result<Features, PredictorError> {
        encode_observation(views, instruction, gripper, &self.encoders, &self.config)
    }

    pub fn predict(&self, features: &Features) -> Result<Prediction, PredictorError> {
        Ok(model::forward(&self.params, &self.config, features)?.0)
    }

    pub fn predict_views(&self, views: &ViewSet, instruction: &str, gripper: f64) -> Result<Prediction, PredictorError> {
        self.predict(&self.encode(views, instruction, gripper)?)
    }

    /// Loss of one example and its gradient with respect to every weight.
    pub fn loss_and_grad(&self, example: &Example) -> Result<(LossParts, Grads), PredictorError> {
        let (pred, cache) = model::forward(&self.params, &self.config, &example.features)?;
        let (parts, dpred) = loss(&pred, &example.target, &self.config.loss_weights);
        let grads = model::backward(&self.params, &self.config, &example.features, &cache, &dpred);
        Ok((parts, grads))
    }

    pub fn loss_of(&self, example: &Example) -> Result<LossParts, PredictorError> {
        let pred = self.predict(&example.features)?;
        Ok(loss(&pred, &example.target, &self.config.loss_weights).0)
    }
}
