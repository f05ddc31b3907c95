//! Sequence models: single-frame logistic baseline, plain LSTM and MultiLSTM.
//!
//! Every model is driven through [`SequenceModel`]: it consumes a chunk of
//! frame features together with a carry from the previous chunk and emits one
//! score matrix per output head. Head `k` at step `i` scores frame `i - k`.

mod attention;
mod frame;
mod loss;
mod lstm;
mod multilstm;

use serde::{Deserialize, Serialize};

pub use attention::{attended_input, attention_weights, AttentionParams};
pub use frame::FrameLogistic;
pub use loss::{multilabel_loss, shift_labels};
pub use lstm::{
    lstm_backward, lstm_forward, lstm_step, GateActivations, LstmCache, LstmForward, LstmParams,
    LstmState,
};
pub use multilstm::{
    consolidate_outputs, consolidation_backward, MultiLstm, MultiLstmCache, MultiLstmConfig,
    MultiLstmParams, OutputHead, StreamCarry,
};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid_matrix, Matrix, SeededRng};

/// A fixed, ordered collection of parameter tensors.
pub trait Parameterized: Clone {
    /// Tensors in their canonical order (also the checkpoint order).
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
    fn tensor_names(&self) -> Vec<String>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::Argument(format!(
                "flat parameter vector has {} entries, expected {}",
                values.len(),
                self.num_parameters()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Result of a chunk forward pass.
pub struct ChunkOutput<C, K> {
    /// One `steps x classes` raw-score matrix per output head.
    pub head_scores: Vec<Matrix>,
    pub carry: C,
    pub cache: K,
}

pub trait SequenceModel {
    type Params: Parameterized;
    type Carry: Clone;
    type Cache;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn input_dim(&self) -> usize;
    fn classes(&self) -> usize;
    /// Number of output heads (frames each step predicts).
    fn output_window(&self) -> usize;
    fn initial_carry(&self) -> Self::Carry;
    fn forward_chunk(
        &self,
        features: &Matrix,
        carry: &Self::Carry,
    ) -> Result<ChunkOutput<Self::Carry, Self::Cache>>;
    /// Parameter gradients given the gradient of each head's scores.
    /// The gradient w.r.t. the incoming carry is not propagated.
    fn backward_chunk(&self, cache: &Self::Cache, d_head_scores: &[Matrix]) -> Result<Self::Params>;
}

/// Runs a model over a whole sequence and returns consolidated per-frame probabilities.
pub fn predict_sequence<M: SequenceModel>(model: &M, features: &Matrix) -> Result<Matrix> {
    let out = model.forward_chunk(features, &model.initial_carry())?;
    let probs: Vec<Matrix> = out.head_scores.iter().map(sigmoid_matrix).collect();
    consolidate_outputs(&probs)
}

/// Runs a model over a sequence in chunks of `chunk` frames, carrying state
/// across chunk boundaries. Returns the concatenated head scores.
pub fn stream_head_scores<M: SequenceModel>(
    model: &M,
    features: &Matrix,
    chunk: usize,
) -> Result<Vec<Matrix>> {
    if chunk == 0 {
        return Err(Error::Argument("chunk length must be at least 1".into()));
    }
    let mut carry = model.initial_carry();
    let mut parts: Vec<Vec<Matrix>> = vec![Vec::new(); model.output_window()];
    let mut start = 0;
    while start < features.rows() {
        let end = (start + chunk).min(features.rows());
        let out = model.forward_chunk(&features.slice_rows(start, end), &carry)?;
        for (k, s) in out.head_scores.into_iter().enumerate() {
            parts[k].push(s);
        }
        carry = out.carry;
        start = end;
    }
    parts.iter().map(|p| Matrix::vstack(p)).collect()
}

/// Which architecture a checkpoint holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SingleFrame,
    Lstm,
    MultiLstm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-frame" => Ok(ModelKind::SingleFrame),
            "lstm" => Ok(ModelKind::Lstm),
            "multilstm" | "multi-lstm" => Ok(ModelKind::MultiLstm),
            other => Err(Error::Config(format!(
                "unknown model kind `{other}` (expected single-frame, lstm or multilstm)"
            ))),
        }
    }
}

/// Architecture plus its hyperparameters; enough to rebuild a model's shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub classes: usize,
    pub multilstm: MultiLstmConfig,
}

/// A model of any supported architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    SingleFrame(FrameLogistic),
    Lstm(LstmParams),
    MultiLstm(MultiLstm),
}

impl AnyModel {
    /// Freshly initialized model for `spec`.
    pub fn init(spec: &ModelSpec, rng: &mut SeededRng) -> Result<Self> {
        let cfg = &spec.multilstm;
        Ok(match spec.kind {
            ModelKind::SingleFrame => AnyModel::SingleFrame(FrameLogistic::init(spec.input_dim, spec.classes, rng)),
            ModelKind::Lstm => AnyModel::Lstm(LstmParams::init(spec.input_dim, cfg.hidden, spec.classes, rng)),
            ModelKind::MultiLstm => AnyModel::MultiLstm(MultiLstm::init(cfg.clone(), spec.input_dim, spec.classes, rng)?),
        })
    }

    /// Zero-parameter model of the right shape (for loading checkpoints).
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let cfg = &spec.multilstm;
        Ok(match spec.kind {
            ModelKind::SingleFrame => AnyModel::SingleFrame(FrameLogistic::zeros(spec.input_dim, spec.classes)),
            ModelKind::Lstm => AnyModel::Lstm(LstmParams::zeros(spec.input_dim, cfg.hidden, spec.classes)),
            ModelKind::MultiLstm => AnyModel::MultiLstm(MultiLstm::zeros(cfg.clone(), spec.input_dim, spec.classes)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::SingleFrame(_) => ModelKind::SingleFrame,
            AnyModel::Lstm(_) => ModelKind::Lstm,
            AnyModel::MultiLstm(_) => ModelKind::MultiLstm,
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        match self {
            AnyModel::SingleFrame(m) => m.tensors(),
            AnyModel::Lstm(m) => m.tensors(),
            AnyModel::MultiLstm(m) => m.params.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            AnyModel::SingleFrame(m) => m.tensors_mut(),
            AnyModel::Lstm(m) => m.tensors_mut(),
            AnyModel::MultiLstm(m) => m.params.tensors_mut(),
        }
    }

    pub fn tensor_names(&self) -> Vec<String> {
        match self {
            AnyModel::SingleFrame(m) => m.tensor_names(),
            AnyModel::Lstm(m) => m.tensor_names(),
            AnyModel::MultiLstm(m) => m.params.tensor_names(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            AnyModel::SingleFrame(m) => m.input_dim(),
            AnyModel::Lstm(m) => SequenceModel::input_dim(m),
            AnyModel::MultiLstm(m) => m.input_dim(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            AnyModel::SingleFrame(m) => m.classes(),
            AnyModel::Lstm(m) => SequenceModel::classes(m),
            AnyModel::MultiLstm(m) => m.classes(),
        }
    }

    /// Consolidated per-frame probabilities for a whole sequence.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        match self {
            AnyModel::SingleFrame(m) => predict_sequence(m, features),
            AnyModel::Lstm(m) => predict_sequence(m, features),
            AnyModel::MultiLstm(m) => predict_sequence(m, features),
        }
    }
}
