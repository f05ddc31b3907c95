//! LSTM with an attention-weighted input window and a window of output heads.
//!
//! At step `i` the input is `Σ_j α_j v_j` over frames `i-W+1 ..= i` (clipped
//! at the sequence start), where `α` is a softmax over
//! `w_aeᵀ [tanh(W_ha h_{i-1}) ⊙ tanh(W_va v_j)]`. Head `k < N` projects `h_i`
//! to scores for frame `i - k`. Per-frame predictions average the sigmoid
//! outputs of every head that scored the frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::attention::AttentionParams;
use crate::model::lstm::{cell_backward, cell_forward, project, GateActivations, LstmParams, LstmState};
use crate::model::{ChunkOutput, Parameterized, SequenceModel};
use crate::numeric::{sigmoid, softmax, Matrix, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiLstmConfig {
    /// Frames the attention can combine, including the current one (W).
    pub input_window: usize,
    /// Frames each step emits predictions for (N).
    pub output_window: usize,
    pub hidden: usize,
    pub attention_units: usize,
    /// Label offset in frames: the prediction at input frame `t` targets frame `t + offset`.
    pub offset: i64,
    pub frame_rate: f64,
}

impl Default for MultiLstmConfig {
    fn default() -> Self {
        MultiLstmConfig {
            input_window: 15,
            output_window: 15,
            hidden: 512,
            attention_units: 50,
            offset: 0,
            frame_rate: 10.0,
        }
    }
}

impl MultiLstmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_window", self.input_window),
            ("output_window", self.output_window),
            ("hidden", self.hidden),
            ("attention_units", self.attention_units),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::Config(format!("frame_rate must be positive, got {}", self.frame_rate)));
        }
        Ok(())
    }
}

/// Output projection for one relative frame offset.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputHead {
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLstmParams {
    /// Recurrent cell; its `w_hy`/`b_y` is the head for the current frame.
    pub lstm: LstmParams,
    pub attention: AttentionParams,
    /// Heads for frames `i-1, i-2, ...`.
    pub extra_heads: Vec<OutputHead>,
}

impl MultiLstmParams {
    pub fn heads(&self) -> usize {
        1 + self.extra_heads.len()
    }

    fn head(&self, k: usize) -> (&Matrix, &Matrix) {
        if k == 0 {
            (&self.lstm.w_hy, &self.lstm.b_y)
        } else {
            let h = &self.extra_heads[k - 1];
            (&h.w, &h.b)
        }
    }

    fn head_mut(&mut self, k: usize) -> (&mut Matrix, &mut Matrix) {
        if k == 0 {
            (&mut self.lstm.w_hy, &mut self.lstm.b_y)
        } else {
            let h = &mut self.extra_heads[k - 1];
            (&mut h.w, &mut h.b)
        }
    }
}

impl Parameterized for MultiLstmParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut out = self.lstm.tensors();
        out.extend(self.attention.tensors());
        for h in &self.extra_heads {
            out.push(&h.w);
            out.push(&h.b);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.lstm.tensors_mut();
        out.extend(self.attention.tensors_mut());
        for h in &mut self.extra_heads {
            out.push(&mut h.w);
            out.push(&mut h.b);
        }
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = self.lstm.tensor_names();
        out.extend(self.attention.tensor_names());
        for k in 1..=self.extra_heads.len() {
            out.push(format!("head{k}.w"));
            out.push(format!("head{k}.b"));
        }
        out
    }
}

/// State passed between consecutive chunks of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamCarry {
    pub state: LstmState,
    /// Up to `W - 1` most recent frames, oldest first.
    pub history: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct AttentionStep {
    window_start: usize,
    alpha: Vec<f64>,
    query: Vec<f64>,
    cell: GateActivations,
}

#[derive(Clone, Debug)]
pub struct MultiLstmCache {
    /// Carried history followed by this chunk's frames.
    frames: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
    steps: Vec<AttentionStep>,
}

impl MultiLstmCache {
    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// Attention weights used at each step, oldest window frame first.
    pub fn attention(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.alpha.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLstm {
    pub config: MultiLstmConfig,
    pub params: MultiLstmParams,
}

impl MultiLstm {
    pub fn zeros(config: MultiLstmConfig, input: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        let (h, c) = (config.hidden, classes);
        let params = MultiLstmParams {
            lstm: LstmParams::zeros(input, h, c),
            attention: AttentionParams::zeros(config.attention_units, h, input),
            extra_heads: (1..config.output_window)
                .map(|_| OutputHead {
                    w: Matrix::zeros(c, h),
                    b: Matrix::zeros(c, 1),
                })
                .collect(),
        };
        Ok(MultiLstm { config, params })
    }

    pub fn init(config: MultiLstmConfig, input: usize, classes: usize, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let (h, c) = (config.hidden, classes);
        let lstm = LstmParams::init(input, h, c, rng);
        let attention = AttentionParams::init(config.attention_units, h, input, rng);
        let scale = 1.0 / (h as f64).sqrt();
        let extra_heads = (1..config.output_window)
            .map(|_| OutputHead {
                w: Matrix::random_uniform(c, h, scale, rng),
                b: Matrix::zeros(c, 1),
            })
            .collect();
        Ok(MultiLstm {
            config,
            params: MultiLstmParams {
                lstm,
                attention,
                extra_heads,
            },
        })
    }

    /// Wraps existing parameters, checking them against `config`.
    pub fn from_params(config: MultiLstmConfig, params: MultiLstmParams) -> Result<Self> {
        config.validate()?;
        params.lstm.validate()?;
        let shape = MultiLstm::zeros(config.clone(), params.lstm.input_dim(), params.lstm.classes())?;
        let expected = shape.params.tensors();
        let got = params.tensors();
        if expected.len() != got.len() || expected.iter().zip(&got).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Consistency("parameters do not match the model configuration".into()));
        }
        Ok(MultiLstm { config, params })
    }

    pub fn input_dim(&self) -> usize {
        self.params.lstm.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.params.lstm.classes()
    }

    /// Full-sequence forward from a fresh state: consolidated predictions and raw head scores.
    pub fn forward_sequence(&self, features: &Matrix) -> Result<(Matrix, ChunkOutput<StreamCarry, MultiLstmCache>)> {
        let out = self.forward_chunk(features, &self.initial_carry())?;
        let probs: Vec<Matrix> = out.head_scores.iter().map(|s| s.map(sigmoid)).collect();
        Ok((consolidate_outputs(&probs)?, out))
    }

    /// Parameter gradients from `dL/dpredictions` for a full sequence
    /// processed by [`MultiLstm::forward_sequence`].
    pub fn backward_from_predictions(
        &self,
        cache: &MultiLstmCache,
        head_scores: &[Matrix],
        d_predictions: &Matrix,
    ) -> Result<MultiLstmParams> {
        if cache.frames.len() != cache.steps.len() {
            return Err(Error::Consistency(
                "prediction gradients need a cache from a full sequence without carried history".into(),
            ));
        }
        let probs: Vec<Matrix> = head_scores.iter().map(|s| s.map(sigmoid)).collect();
        let d_probs = consolidation_backward(&probs, d_predictions)?;
        let d_scores: Vec<Matrix> = d_probs
            .iter()
            .zip(&probs)
            .map(|(dp, p)| {
                let mut d = dp.clone();
                for (g, &q) in d.data_mut().iter_mut().zip(p.data()) {
                    *g *= q * (1.0 - q);
                }
                d
            })
            .collect();
        self.backward_chunk(cache, &d_scores)
    }

    /// Gradients of parameters and of the incoming LSTM state.
    pub fn backward_with_state(
        &self,
        cache: &MultiLstmCache,
        d_head_scores: &[Matrix],
    ) -> Result<(MultiLstmParams, LstmState)> {
        let p = &self.params;
        let steps = cache.steps.len();
        let classes = self.classes();
        if d_head_scores.len() != p.heads() {
            return Err(Error::Consistency(format!(
                "model has {} output heads, got {} gradients",
                p.heads(),
                d_head_scores.len()
            )));
        }
        if let Some(d) = d_head_scores.iter().find(|d| d.shape() != (steps, classes)) {
            return Err(Error::Consistency(format!(
                "head gradient has shape {:?}, the cache holds {steps} steps of {classes} classes",
                d.shape()
            )));
        }
        if cache.keys.first().is_some_and(|k| k.len() != p.attention.units())
            || cache.frames.first().is_some_and(|f| f.len() != self.input_dim())
        {
            return Err(Error::Consistency("cache was produced by a model of a different shape".into()));
        }

        let hidden = self.config.hidden;
        let units = p.attention.units();
        let mut grads = p.zeros_like();
        let mut d_keys = vec![vec![0.0; units]; cache.frames.len()];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let w_ae = p.attention.w_ae.data();

        for i in (0..steps).rev() {
            let step = &cache.steps[i];
            let h = &step.cell.h;
            let mut dh = dh_next;
            for (k, d_scores) in d_head_scores.iter().enumerate() {
                let dy = d_scores.row(i);
                let (w, _) = p.head(k);
                w.matvec_t_acc(dy, &mut dh);
                let (gw, gb) = grads.head_mut(k);
                gw.add_outer(dy, h);
                gb.add_to_column(dy);
            }
            let (mut dh_prev, dc_prev, dx) = cell_backward(&p.lstm, &step.cell, &dh, &dc_next, &mut grads.lstm);

            // x = Σ α_j v_j, α = softmax(e), e_j = Σ_a w_ae[a] q[a] u_j[a]
            let window = step.window_start..step.window_start + step.alpha.len();
            let d_alpha: Vec<f64> = cache.frames[window.clone()]
                .iter()
                .map(|v| v.iter().zip(&dx).map(|(a, b)| a * b).sum())
                .collect();
            let mean: f64 = step.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            let mut d_query = vec![0.0; units];
            let gw_ae = grads.attention.w_ae.data_mut();
            for (j, frame) in window.enumerate() {
                let de = step.alpha[j] * (d_alpha[j] - mean);
                if de == 0.0 {
                    continue;
                }
                let key = &cache.keys[frame];
                let d_key = &mut d_keys[frame];
                for a in 0..units {
                    gw_ae[a] += de * step.query[a] * key[a];
                    d_query[a] += de * w_ae[a] * key[a];
                    d_key[a] += de * w_ae[a] * step.query[a];
                }
            }
            let d_query_pre: Vec<f64> = d_query
                .iter()
                .zip(&step.query)
                .map(|(d, q)| d * (1.0 - q * q))
                .collect();
            grads.attention.w_ha.add_outer(&d_query_pre, &step.cell.h_prev);
            p.attention.w_ha.matvec_t_acc(&d_query_pre, &mut dh_prev);

            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        for ((frame, key), d_key) in cache.frames.iter().zip(&cache.keys).zip(&d_keys) {
            let d_pre: Vec<f64> = d_key.iter().zip(key).map(|(d, u)| d * (1.0 - u * u)).collect();
            grads.attention.w_va.add_outer(&d_pre, frame);
        }
        Ok((grads, LstmState { h: dh_next, c: dc_next }))
    }
}

impl SequenceModel for MultiLstm {
    type Params = MultiLstmParams;
    type Carry = StreamCarry;
    type Cache = MultiLstmCache;

    fn params(&self) -> &MultiLstmParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut MultiLstmParams {
        &mut self.params
    }

    fn input_dim(&self) -> usize {
        MultiLstm::input_dim(self)
    }

    fn classes(&self) -> usize {
        MultiLstm::classes(self)
    }

    fn output_window(&self) -> usize {
        self.params.heads()
    }

    fn initial_carry(&self) -> StreamCarry {
        StreamCarry {
            state: LstmState::zeros(self.config.hidden),
            history: Vec::new(),
        }
    }

    fn forward_chunk(&self, features: &Matrix, carry: &StreamCarry) -> Result<ChunkOutput<StreamCarry, MultiLstmCache>> {
        if features.rows() == 0 {
            return Err(Error::Argument("MultiLSTM forward needs at least one frame".into()));
        }
        if features.cols() != self.input_dim() {
            return Err(Error::shape("multilstm_forward", features.shape(), (features.rows(), self.input_dim())));
        }
        if carry.history.len() >= self.config.input_window || carry.history.iter().any(|f| f.len() != self.input_dim()) {
            return Err(Error::Argument("carried frame history does not match the input window".into()));
        }
        let p = &self.params;
        let window_len = self.config.input_window;
        let history = carry.history.len();
        let mut frames = carry.history.clone();
        frames.extend(features.row_iter().map(|r| r.to_vec()));
        let keys: Vec<Vec<f64>> = frames.iter().map(|f| p.attention.frame_key(f)).collect();

        let steps = features.rows();
        let mut head_scores = vec![Matrix::zeros(steps, self.classes()); p.heads()];
        let mut cache_steps = Vec::with_capacity(steps);
        let mut state = carry.state.clone();
        for i in 0..steps {
            let pos = history + i;
            let window_start = (pos + 1).saturating_sub(window_len);
            let query = p.attention.query(&state.h);
            let logits: Vec<f64> = keys[window_start..=pos].iter().map(|k| p.attention.logit(&query, k)).collect();
            let alpha = softmax(&logits)?;
            let x = super::attended_input(&alpha, &frames[window_start..=pos])?;
            let cell = cell_forward(&p.lstm, &x, &state)?;
            for (k, scores) in head_scores.iter_mut().enumerate() {
                let (w, b) = p.head(k);
                scores.row_mut(i).copy_from_slice(&project(w, b, &cell.h));
            }
            state = LstmState {
                h: cell.h.clone(),
                c: cell.c.clone(),
            };
            cache_steps.push(AttentionStep {
                window_start,
                alpha,
                query,
                cell,
            });
        }

        let keep = frames.len().min(window_len - 1);
        let next = StreamCarry {
            state,
            history: frames[frames.len() - keep..].to_vec(),
        };
        Ok(ChunkOutput {
            head_scores,
            carry: next,
            cache: MultiLstmCache {
                frames,
                keys,
                steps: cache_steps,
            },
        })
    }

    fn backward_chunk(&self, cache: &MultiLstmCache, d_head_scores: &[Matrix]) -> Result<MultiLstmParams> {
        Ok(self.backward_with_state(cache, d_head_scores)?.0)
    }
}

/// Averages per-head probabilities into per-frame predictions.
///
/// `head_probs[k]` row `i` is step `i`'s prediction for frame `i - k`; rows
/// with `i < k` are ignored. Frame `t` is the mean over the `min(N, T - t)`
/// heads that scored it.
pub fn consolidate_outputs(head_probs: &[Matrix]) -> Result<Matrix> {
    let first = head_probs
        .first()
        .ok_or_else(|| Error::Argument("consolidation needs at least one output head".into()))?;
    let (steps, classes) = first.shape();
    if let Some(m) = head_probs.iter().find(|m| m.shape() != first.shape()) {
        return Err(Error::shape("consolidate_outputs", first.shape(), m.shape()));
    }
    let mut out = Matrix::zeros(steps, classes);
    for t in 0..steps {
        let contributors: Vec<&[f64]> = head_probs
            .iter()
            .enumerate()
            .take_while(|(k, _)| t + k < steps)
            .map(|(k, m)| m.row(t + k))
            .collect();
        let n = contributors.len() as f64;
        let row = out.row_mut(t);
        for c in 0..classes {
            let sum: f64 = contributors.iter().fold(0.0, |acc, r| acc + r[c]);
            row[c] = sum / n;
        }
    }
    Ok(out)
}

/// Gradient of [`consolidate_outputs`] w.r.t. each head's probabilities.
pub fn consolidation_backward(head_probs: &[Matrix], d_predictions: &Matrix) -> Result<Vec<Matrix>> {
    let first = head_probs
        .first()
        .ok_or_else(|| Error::Argument("consolidation needs at least one output head".into()))?;
    if d_predictions.shape() != first.shape() {
        return Err(Error::shape("consolidation_backward", first.shape(), d_predictions.shape()));
    }
    let (steps, classes) = first.shape();
    let heads = head_probs.len();
    let mut out = vec![Matrix::zeros(steps, classes); heads];
    for t in 0..steps {
        let n = heads.min(steps - t) as f64;
        for (k, d) in out.iter_mut().enumerate().take(heads.min(steps - t)) {
            for c in 0..classes {
                d.set(t + k, c, d_predictions.get(t, c) / n);
            }
        }
    }
    Ok(out)
}
