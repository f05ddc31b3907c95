use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_rows, Dataset, DenseLabels};
use crate::error::{Error, Result};
use crate::model::{shift_labels, AnyModel, Parameterized, SequenceModel};
use crate::numeric::{log_sigmoid, sigmoid, Matrix, SeededRng};
use crate::train::rmsprop::{clip_global_norm, rmsprop_step, RmsPropConfig, RmsPropState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Frames per minibatch; also the backpropagation horizon.
    pub minibatch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global-norm gradient clipping threshold.
    pub clip: f64,
    pub optimizer: RmsPropConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            minibatch: 32,
            epochs: 10,
            seed: 0,
            clip: 5.0,
            optimizer: RmsPropConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch length must be at least 1".into()));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::Config(format!("clip threshold must be positive, got {}", self.clip)));
        }
        self.optimizer.validate()
    }
}

/// One training sequence with labels already shifted to the model's offset.
#[derive(Clone, Debug)]
pub struct TrainingVideo {
    pub features: Matrix,
    pub labels: DenseLabels,
    /// `false` for frames whose shifted label falls outside the video.
    pub mask: Vec<bool>,
}

pub fn training_videos(dataset: &Dataset, offset: i64) -> Result<Vec<TrainingVideo>> {
    dataset
        .videos
        .iter()
        .map(|v| {
            let (labels, mask) = shift_labels(&v.labels(dataset.num_classes())?, offset)?;
            Ok(TrainingVideo { features: v.features()?.clone(), labels, mask })
        })
        .collect()
}

/// Summed logistic loss of every head over one chunk and its gradient.
///
/// Head `k` at global step `g` targets label row `g - k`; rows before the
/// video start or outside the mask contribute nothing. Returns the loss sum,
/// the number of contributing (head, frame) rows and `dL/dscores`.
pub fn chunk_loss(head_scores: &[Matrix], video: &TrainingVideo, start: usize) -> Result<(f64, usize, Vec<Matrix>)> {
    let mut loss = 0.0;
    let mut rows = 0usize;
    let mut grads = Vec::with_capacity(head_scores.len());
    for (k, scores) in head_scores.iter().enumerate() {
        if scores.cols() != video.labels.classes() || start + scores.rows() > video.labels.frames() {
            return Err(Error::shape("chunk_loss", scores.shape(), (video.labels.frames(), video.labels.classes())));
        }
        let mut d = Matrix::zeros(scores.rows(), scores.cols());
        for i in 0..scores.rows() {
            let Some(frame) = (start + i).checked_sub(k) else { continue };
            if !video.mask[frame] {
                continue;
            }
            rows += 1;
            for c in 0..scores.cols() {
                let y = scores.get(i, c);
                let z = video.labels.get(frame, c);
                loss -= if z { log_sigmoid(y) } else { log_sigmoid(-y) };
                d.set(i, c, sigmoid(y) - if z { 1.0 } else { 0.0 });
            }
        }
        grads.push(d);
    }
    Ok((loss, rows, grads))
}

fn check_dims<M: SequenceModel>(model: &M, videos: &[TrainingVideo]) -> Result<()> {
    if videos.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for v in videos {
        if v.features.cols() != model.input_dim() || v.labels.classes() != model.classes() {
            return Err(Error::Config(format!(
                "model expects {} features / {} classes, video has {} / {}",
                model.input_dim(),
                model.classes(),
                v.features.cols(),
                v.labels.classes()
            )));
        }
        if v.features.rows() != v.labels.frames() || v.mask.len() != v.labels.frames() {
            return Err(Error::Config("features, labels and mask disagree on frame count".into()));
        }
    }
    Ok(())
}

/// Mean per-row loss over the whole set without updating anything.
pub fn mean_loss<M: SequenceModel>(model: &M, videos: &[TrainingVideo], minibatch: usize) -> Result<f64> {
    check_dims(model, videos)?;
    let (mut total, mut rows) = (0.0, 0usize);
    for v in videos {
        let mut carry = model.initial_carry();
        let mut start = 0;
        while start < v.features.rows() {
            let end = (start + minibatch).min(v.features.rows());
            let out = model.forward_chunk(&v.features.slice_rows(start, end), &carry)?;
            let (l, r, _) = chunk_loss(&out.head_scores, v, start)?;
            total += l;
            rows += r;
            carry = out.carry;
            start = end;
        }
    }
    Ok(if rows == 0 { 0.0 } else { total / rows as f64 })
}

/// Trains for `config.epochs` epochs starting after `first_epoch` completed
/// ones. Returns the mean training loss of each epoch.
///
/// Each epoch visits the videos in a seeded random order; within a video,
/// minibatches run in order with the carry passed forward and gradients
/// confined to the minibatch. State resets at every video.
pub fn train<M: SequenceModel>(
    model: &mut M,
    videos: &[TrainingVideo],
    config: &TrainConfig,
    state: &mut RmsPropState,
    first_epoch: usize,
) -> Result<Vec<f64>> {
    config.validate()?;
    check_dims(model, videos)?;
    let root = SeededRng::new(config.seed);
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in first_epoch + 1..=first_epoch + config.epochs {
        let mut order: Vec<usize> = (0..videos.len()).collect();
        root.substream(epoch as u64).shuffle(&mut order);
        let (mut total, mut rows) = (0.0, 0usize);
        for &vi in &order {
            let v = &videos[vi];
            let mut carry = model.initial_carry();
            let mut start = 0;
            while start < v.features.rows() {
                let end = (start + config.minibatch).min(v.features.rows());
                let out = model.forward_chunk(&v.features.slice_rows(start, end), &carry)?;
                let (loss, n, mut d) = chunk_loss(&out.head_scores, v, start)?;
                step += 1;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, step, loss });
                }
                if n > 0 {
                    let scale = 1.0 / n as f64;
                    d.iter_mut().for_each(|m| m.scale(scale));
                    let mut grads = model.backward_chunk(&out.cache, &d)?;
                    clip_global_norm(&mut grads, config.clip);
                    rmsprop_step(model.params_mut(), &grads, state)?;
                    if !model.params().is_finite() {
                        return Err(Error::Divergence { epoch, step, loss: f64::NAN });
                    }
                }
                total += loss;
                rows += n;
                carry = out.carry;
                start = end;
            }
        }
        let mean = if rows == 0 { 0.0 } else { total / rows as f64 };
        log::info!("epoch {epoch}: mean loss {mean:.6}");
        log.push(mean);
    }
    Ok(log)
}

/// [`train`] for a model of any architecture.
pub fn train_any(
    model: &mut AnyModel,
    videos: &[TrainingVideo],
    config: &TrainConfig,
    state: &mut RmsPropState,
    first_epoch: usize,
) -> Result<Vec<f64>> {
    match model {
        AnyModel::SingleFrame(m) => train(m, videos, config, state, first_epoch),
        AnyModel::Lstm(m) => train(m, videos, config, state, first_epoch),
        AnyModel::MultiLstm(m) => train(m, videos, config, state, first_epoch),
    }
}

pub fn mean_loss_any(model: &AnyModel, videos: &[TrainingVideo], minibatch: usize) -> Result<f64> {
    match model {
        AnyModel::SingleFrame(m) => mean_loss(m, videos, minibatch),
        AnyModel::Lstm(m) => mean_loss(m, videos, minibatch),
        AnyModel::MultiLstm(m) => mean_loss(m, videos, minibatch),
    }
}

/// `epoch,mean_loss`; entry 0 is the loss before training.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let rows = losses
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), format!("{l:.8}")]);
    write_rows(path, &["epoch", "mean_loss"], rows)
}
