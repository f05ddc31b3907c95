use crate::error::{Error, Result};
use crate::model::Parameterized;
use crate::numeric::{softmax, Matrix, SeededRng};

/// Soft-attention weights over the input window: the agreement vector
/// `w_ae` (`A x 1`), the hidden-state query `w_ha` (`A x H`) and the
/// per-frame key `w_va` (`A x D`).
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_ae: Matrix,
    pub w_ha: Matrix,
    pub w_va: Matrix,
}

impl AttentionParams {
    pub fn zeros(units: usize, hidden: usize, input: usize) -> Self {
        AttentionParams {
            w_ae: Matrix::zeros(units, 1),
            w_ha: Matrix::zeros(units, hidden),
            w_va: Matrix::zeros(units, input),
        }
    }

    pub fn init(units: usize, hidden: usize, input: usize, rng: &mut SeededRng) -> Self {
        AttentionParams {
            w_ae: Matrix::random_uniform(units, 1, 1.0 / (units as f64).sqrt(), rng),
            w_ha: Matrix::random_uniform(units, hidden, 1.0 / (hidden as f64).sqrt(), rng),
            w_va: Matrix::random_uniform(units, input, 1.0 / (input as f64).sqrt(), rng),
        }
    }

    pub fn units(&self) -> usize {
        self.w_ae.rows()
    }

    /// `tanh(W_va v)` for one frame.
    pub(crate) fn frame_key(&self, frame: &[f64]) -> Vec<f64> {
        let mut u = self.w_va.matvec(frame);
        u.iter_mut().for_each(|v| *v = v.tanh());
        u
    }

    /// `tanh(W_ha h)` for the previous hidden state.
    pub(crate) fn query(&self, h_prev: &[f64]) -> Vec<f64> {
        let mut q = self.w_ha.matvec(h_prev);
        q.iter_mut().for_each(|v| *v = v.tanh());
        q
    }

    /// Logit of one frame: `w_aeᵀ (query ⊙ key)`.
    pub(crate) fn logit(&self, query: &[f64], key: &[f64]) -> f64 {
        self.w_ae
            .data()
            .iter()
            .zip(query)
            .zip(key)
            .map(|((w, q), u)| w * q * u)
            .sum()
    }
}

impl Parameterized for AttentionParams {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.w_ae, &self.w_ha, &self.w_va]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w_ae, &mut self.w_ha, &mut self.w_va]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["w_ae".into(), "w_ha".into(), "w_va".into()]
    }
}

/// Softmax-normalized attention over `window` (oldest frame first), given
/// the hidden state from the previous step.
pub fn attention_weights<R: AsRef<[f64]>>(attn: &AttentionParams, h_prev: &[f64], window: &[R]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::Argument("attention window is empty".into()));
    }
    if h_prev.len() != attn.w_ha.cols() {
        return Err(Error::shape("attention_weights", (h_prev.len(), 1), attn.w_ha.shape()));
    }
    let query = attn.query(h_prev);
    let logits = window
        .iter()
        .map(|v| {
            let v = v.as_ref();
            if v.len() != attn.w_va.cols() {
                return Err(Error::shape("attention_weights", (v.len(), 1), attn.w_va.shape()));
            }
            Ok(attn.logit(&query, &attn.frame_key(v)))
        })
        .collect::<Result<Vec<_>>>()?;
    softmax(&logits)
}

/// `Σ_j α_j v_j`.
pub fn attended_input<R: AsRef<[f64]>>(alpha: &[f64], window: &[R]) -> Result<Vec<f64>> {
    if alpha.len() != window.len() {
        return Err(Error::shape("attended_input", (alpha.len(), 1), (window.len(), 1)));
    }
    let dim = window.first().map_or(0, |v| v.as_ref().len());
    let mut x = vec![0.0; dim];
    for (&a, v) in alpha.iter().zip(window) {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::shape("attended_input", (v.len(), 1), (dim, 1)));
        }
        for (o, &f) in x.iter_mut().zip(v) {
            *o += a * f;
        }
    }
    Ok(x)
}
