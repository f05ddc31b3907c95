use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Parameterized;
use crate::numeric::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropConfig {
    pub decay: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            decay: 0.95,
            epsilon: 1e-8,
            learning_rate: 1e-3,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.decay) {
            return Err(Error::Config(format!("RMSProp decay must lie in [0, 1), got {}", self.decay)));
        }
        if !(self.epsilon >= 0.0 && self.learning_rate > 0.0) {
            return Err(Error::Config("RMSProp needs epsilon >= 0 and a positive learning rate".into()));
        }
        Ok(())
    }
}

/// Running average of squared gradients, one matrix per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    pub config: RmsPropConfig,
    pub cache: Vec<Matrix>,
}

impl RmsPropState {
    pub fn new<P: Parameterized>(config: RmsPropConfig, params: &P) -> Self {
        Self::for_tensors(config, &params.tensors())
    }

    pub fn for_tensors(config: RmsPropConfig, tensors: &[&Matrix]) -> Self {
        RmsPropState {
            config,
            cache: tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
        }
    }
}

/// `cache ← ρ cache + (1-ρ) g²; θ ← θ - η g / (√cache + ε)`, elementwise.
pub fn rmsprop_update(params: Vec<&mut Matrix>, grads: Vec<&Matrix>, state: &mut RmsPropState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.cache.len() {
        return Err(Error::Argument(format!(
            "RMSProp got {} parameter, {} gradient and {} cache tensors",
            params.len(),
            grads.len(),
            state.cache.len()
        )));
    }
    let RmsPropConfig { decay, epsilon, learning_rate } = state.config;
    for ((p, g), cache) in params.into_iter().zip(grads).zip(&mut state.cache) {
        if p.shape() != g.shape() || p.shape() != cache.shape() {
            return Err(Error::shape("rmsprop_update", p.shape(), g.shape()));
        }
        for ((theta, &g), r) in p.data_mut().iter_mut().zip(g.data()).zip(cache.data_mut()) {
            *r = decay * *r + (1.0 - decay) * g * g;
            *theta -= learning_rate * g / (r.sqrt() + epsilon);
        }
    }
    Ok(())
}

pub fn rmsprop_step<P: Parameterized>(params: &mut P, grads: &P, state: &mut RmsPropState) -> Result<()> {
    rmsprop_update(params.tensors_mut(), grads.tensors(), state)
}

/// Rescales `grads` so its global norm is at most `threshold`. Returns the
/// norm before clipping.
pub fn clip_global_norm<P: Parameterized>(grads: &mut P, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > threshold && norm > 0.0 {
        let s = threshold / norm;
        grads.tensors_mut().into_iter().for_each(|t| t.scale(s));
    }
    norm
}
