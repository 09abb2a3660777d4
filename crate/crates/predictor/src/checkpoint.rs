use std::path::Path;

use c2f_core::format::{Tensor, TensorFile};
use serde::{Deserialize, Serialize};

use crate::{Encoders, ModelConfig, Predictor, PredictorError};

pub const CHECKPOINT_KIND: &str = "checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    model: ModelConfig,
    /// rgb, depth, position and text encoder names.
    encoders: [String; 4],
    step: u64,
}

fn encoder_names(e: &Encoders) -> [String; 4] {
    [e.rgb.name(), e.depth.name(), e.position.name(), e.text.name()].map(String::from)
}

/// Write the weights as f32 tensors with the model config in the header.
pub fn save_checkpoint(path: &Path, predictor: &Predictor, step: u64) -> Result<(), PredictorError> {
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        model: predictor.config.clone(),
        encoders: encoder_names(&predictor.encoders),
        step,
    };
    let mut file = TensorFile::new(CHECKPOINT_KIND);
    file.meta = serde_json::to_value(&meta).map_err(|e| PredictorError::Checkpoint(e.to_string()))?;
    for (name, t) in predictor.params.tensors() {
        file.push(Tensor::from_f64(name, vec![t.nrows(), t.ncols()], t.iter().copied()));
    }
    file.save(path)?;
    Ok(())
}

/// Rebuild a predictor with the toy encoders. Returns it with the stored
/// step count.
pub fn load_checkpoint(path: &Path) -> Result<(Predictor, u64), PredictorError> {
    let file = TensorFile::load(path)?;
    file.expect_kind(CHECKPOINT_KIND)?;
    let meta: CheckpointMeta =
        serde_json::from_value(file.meta.clone()).map_err(|e| PredictorError::Checkpoint(e.to_string()))?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(PredictorError::Checkpoint(format!("unsupported checkpoint version {}", meta.version)));
    }
    let mut predictor = Predictor::new(meta.model)?;
    let expected = encoder_names(&predictor.encoders);
    if meta.encoders != expected {
        return Err(PredictorError::Checkpoint(format!(
            "checkpoint encoders {:?} are not the toy encoders {expected:?}",
            meta.encoders
        )));
    }
    let names: Vec<String> = predictor.params.tensors().into_iter().map(|(n, _)| n).collect();
    if file.tensors.len() != names.len() {
        return Err(PredictorError::Checkpoint(format!(
            "{} tensors, model has {}",
            file.tensors.len(),
            names.len()
        )));
    }
    for (name, dst) in names.iter().zip(predictor.params.tensors_mut()) {
        let src = file.get_shaped(name, &[dst.nrows(), dst.ncols()])?;
        for (d, s) in dst.iter_mut().zip(&src.data) {
            *d = *s as f64;
        }
    }
    Ok((predictor, meta.step))
}
