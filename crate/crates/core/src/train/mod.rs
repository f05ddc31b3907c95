//! RMSProp, stateful truncated-BPTT training and checkpoints.

mod checkpoint;
mod rmsprop;
mod trainer;

pub use checkpoint::Checkpoint;
pub use rmsprop::{clip_global_norm, rmsprop_step, rmsprop_update, RmsPropConfig, RmsPropState};
pub use trainer::{
    chunk_loss, mean_loss, mean_loss_any, train, train_any, training_videos, write_loss_csv, TrainConfig,
    TrainingVideo,
};

use crate::data::Dataset;
use crate::error::Result;
use crate::model::{AnyModel, ModelSpec};
use crate::numeric::SeededRng;

/// Initializes a model from `config.seed`, trains it on `dataset` and returns
/// the checkpoint together with the loss log (entry 0 is the initial loss).
pub fn fit(spec: &ModelSpec, dataset: &Dataset, config: &TrainConfig) -> Result<(Checkpoint, Vec<f64>)> {
    config.validate()?;
    spec.multilstm.validate()?;
    let mut model = AnyModel::init(spec, &mut SeededRng::new(config.seed))?;
    let videos = training_videos(dataset, spec.multilstm.offset)?;
    let mut optimizer = RmsPropState::for_tensors(config.optimizer, &model.tensors());
    let mut log = vec![mean_loss_any(&model, &videos, config.minibatch)?];
    log.extend(train_any(&mut model, &videos, config, &mut optimizer, 0)?);
    let checkpoint = Checkpoint {
        spec: spec.clone(),
        model,
        optimizer,
        train: config.clone(),
        epoch: config.epochs,
    };
    Ok((checkpoint, log))
}
