use c2f_core::rng::stream;
use c2f_core::trajectory::store::StoredSample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::crop_jitter;
use crate::{prepare_example, Adam, Example, LossParts, ModelConfig, Params, Predictor, PredictorError, TrainConfig};

/// Seeded split into (train, held-out) sample indices. At least one sample
/// always stays in training.
pub fn split_indices(n: usize, holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(&["holdout", &seed.to_string()]));
    let k = ((n as f64 * holdout).floor() as usize).min(n.saturating_sub(1));
    let held = idx.split_off(n - k);
    idx.sort_unstable();
    let mut held = held;
    held.sort_unstable();
    (idx, held)
}

/// Crop and encode every stored sample; samples whose keypoint falls
/// outside their crop are skipped with a warning. Order is preserved.
pub fn prepare_examples(
    samples: &[StoredSample],
    predictor: &Predictor,
    config: &TrainConfig,
) -> Result<Vec<Example>, PredictorError> {
    let out: Vec<Option<Example>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let center = s.sample.keypoint + crop_jitter(config.seed, i, config.crop_jitter);
            match prepare_example(&s.cloud, &s.sample, &center, config.cube_side, &predictor.encoders, &predictor.config) {
                Ok(e) => Ok(Some(e)),
                Err(PredictorError::TargetOutside { keypoint, .. }) => {
                    tracing::warn!(sample = i, ?keypoint, "target outside its crop, skipped");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Adam over mean-reduced minibatch gradients. Per-example gradients are
/// computed in parallel and summed in batch order, so results do not depend
/// on the thread count.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub adam: Adam,
    pub lr: f64,
    pub steps: u64,
}

impl Trainer {
    pub fn new(params: &Params, config: &TrainConfig) -> Self {
        Self {
            adam: Adam::new(params, config.beta1, config.beta2, config.eps),
            lr: config.lr,
            steps: 0,
        }
    }

    /// One optimizer step. A non-finite loss or gradient leaves the weights
    /// untouched and returns them as the last good state.
    pub fn step(&mut self, predictor: &mut Predictor, batch: &[&Example]) -> Result<LossParts, PredictorError> {
        if batch.is_empty() {
            return Err(PredictorError::EmptyDataset);
        }
        let per: Vec<(LossParts, Params)> = batch
            .par_iter()
            .map(|e| predictor.loss_and_grad(e))
            .collect::<Result<_, _>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut mean = LossParts::default();
        let mut grads = predictor.params.zeros_like();
        for (l, g) in &per {
            mean.total += l.total * scale;
            mean.heatmap += l.heatmap * scale;
            mean.rotation += l.rotation * scale;
            mean.gripper += l.gripper * scale;
            grads.add_assign(g);
        }
        grads.scale(scale);
        if !mean.total.is_finite() || !grads.is_finite() {
            return Err(PredictorError::NonFiniteLoss {
                step: self.steps,
                last_good: Box::new(predictor.params.clone()),
            });
        }
        self.adam.step(&mut predictor.params, &grads, self.lr);
        self.steps += 1;
        Ok(mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub samples: usize,
    /// Mean distance between the heatmap argmax and the target pixel.
    pub pixel_error: [f64; 3],
    pub mean_pixel_error: f64,
    /// Fraction of samples with all three rotation bins right.
    pub rotation_accuracy: f64,
    pub gripper_accuracy: f64,
    pub loss: LossParts,
}

pub fn evaluate_examples(predictor: &Predictor, examples: &[Example]) -> Result<EvalStats, PredictorError> {
    let rows: Vec<([f64; 3], bool, bool, LossParts)> = examples
        .par_iter()
        .map(|e| {
            let pred = predictor.predict(&e.features)?;
            let heat = pred.heatmaps(predictor.config.resolution);
            let target = e.target_pixels();
            let err = [0, 1, 2].map(|v| {
                let (u, w) = heat[v].argmax();
                let (tu, tv) = target[v];
                ((u as f64 - tu as f64).powi(2) + (w as f64 - tv as f64).powi(2)).sqrt()
            });
            let rot = pred.rotation_bins() == e.target.rotation_bins;
            let grip = (pred.grip_logit > 0.0) == (e.target.gripper > 0.5);
            let l = crate::loss(&pred, &e.target, &predictor.config.loss_weights).0;
            Ok((err, rot, grip, l))
        })
        .collect::<Result<_, PredictorError>>()?;
    let n = rows.len();
    let mut s = EvalStats {
        samples: n,
        pixel_error: [0.0; 3],
        mean_pixel_error: 0.0,
        rotation_accuracy: 0.0,
        gripper_accuracy: 0.0,
        loss: LossParts::default(),
    };
    if n == 0 {
        return Ok(s);
    }
    let k = 1.0 / n as f64;
    for (err, rot, grip, l) in rows {
        for v in 0..3 {
            s.pixel_error[v] += err[v] * k;
        }
        s.rotation_accuracy += rot as u8 as f64 * k;
        s.gripper_accuracy += grip as u8 as f64 * k;
        s.loss.total += l.total * k;
        s.loss.heatmap += l.heatmap * k;
        s.loss.rotation += l.rotation * k;
        s.loss.gripper += l.gripper * k;
    }
    s.mean_pixel_error = s.pixel_error.iter().sum::<f64>() / 3.0;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: u64,
    /// Sample-weighted mean of the minibatch losses.
    pub loss: LossParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub parameters: usize,
    pub train_samples: usize,
    pub holdout_samples: usize,
    pub skipped_samples: usize,
    pub epochs: Vec<EpochLog>,
    pub final_train: EvalStats,
    /// Falls back to the training split when nothing is held out.
    pub final_holdout: EvalStats,
}

/// Seeded training over `train_set`, reporting on `holdout`.
pub fn train(
    predictor: &mut Predictor,
    train_set: &[Example],
    holdout: &[Example],
    config: &TrainConfig,
) -> Result<TrainReport, PredictorError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    let mut trainer = Trainer::new(&predictor.params, config);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut stream(&["epoch-order", &config.seed.to_string(), &epoch.to_string()]));
        let mut loss = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|i| &train_set[*i]).collect();
            let l = trainer.step(predictor, &batch)?;
            let w = chunk.len() as f64 / train_set.len() as f64;
            loss.total += l.total * w;
            loss.heatmap += l.heatmap * w;
            loss.rotation += l.rotation * w;
            loss.gripper += l.gripper * w;
        }
        tracing::info!(epoch, loss = loss.total, "epoch done");
        epochs.push(EpochLog {
            epoch,
            steps: trainer.steps,
            loss,
        });
    }
    let final_train = evaluate_examples(predictor, train_set)?;
    let final_holdout = if holdout.is_empty() {
        final_train
    } else {
        evaluate_examples(predictor, holdout)?
    };
    Ok(TrainReport {
        model: predictor.config.clone(),
        train: config.clone(),
        parameters: predictor.params.count(),
        train_samples: train_set.len(),
        holdout_samples: holdout.len(),
        skipped_samples: 0,
        epochs,
        final_train,
        final_holdout,
    })
}
