//! Finite-difference verification of every model's backward pass.

use serde::Serialize;

use crate::data::DenseLabels;
use crate::error::Result;
use crate::model::{FrameLogistic, LstmParams, MultiLstm, MultiLstmConfig, Parameterized, SequenceModel};
use crate::numeric::{finite_diff_gradient, relative_error, Matrix, SeededRng, DEFAULT_STEP};
use crate::train::{chunk_loss, TrainingVideo};

/// Problem size for the gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub attention: usize,
    pub input_window: usize,
    pub output_window: usize,
    pub frames: usize,
}

impl Default for CheckDims {
    fn default() -> Self {
        CheckDims {
            input: 4,
            hidden: 5,
            classes: 3,
            attention: 4,
            input_window: 3,
            output_window: 2,
            frames: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorCheck {
    pub model: String,
    pub tensor: String,
    pub coordinates: usize,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub checks: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.max_relative_error < self.tolerance)
    }

    pub fn coordinates(&self) -> usize {
        self.checks.iter().map(|c| c.coordinates).sum()
    }
}

/// Overwrites every parameter with `U(-scale, scale)` so biases and heads
/// are exercised away from their initial values.
fn randomize<P: Parameterized>(params: &mut P, scale: f64, rng: &mut SeededRng) -> Result<()> {
    let values: Vec<f64> = (0..params.num_parameters()).map(|_| rng.uniform(-scale, scale)).collect();
    params.assign_flat(&values)
}

fn random_video(dims: &CheckDims, rng: &mut SeededRng) -> TrainingVideo {
    let features = Matrix::random_uniform(dims.frames, dims.input, 1.0, rng);
    let mut labels = DenseLabels::zeros(dims.frames, dims.classes);
    for t in 0..dims.frames {
        for c in 0..dims.classes {
            labels.set(t, c, rng.uniform(0.0, 1.0) < 0.4);
        }
    }
    TrainingVideo { features, labels, mask: vec![true; dims.frames] }
}

/// Compares `backward_chunk` on the training loss of one chunk against
/// central differences, tensor by tensor.
pub fn check_model<M>(name: &str, model: &mut M, video: &TrainingVideo) -> Result<Vec<TensorCheck>>
where
    M: SequenceModel + Clone,
{
    let out = model.forward_chunk(&video.features, &model.initial_carry())?;
    let (_, _, d) = chunk_loss(&out.head_scores, video, 0)?;
    let analytic = model.backward_chunk(&out.cache, &d)?;
    let theta = model.params().flatten();
    let mut probe = model.clone();
    let numeric = finite_diff_gradient(
        |x| {
            probe.params_mut().assign_flat(x).expect("length fixed");
            let out = probe.forward_chunk(&video.features, &probe.initial_carry()).expect("shapes fixed");
            chunk_loss(&out.head_scores, video, 0).expect("shapes fixed").0
        },
        &theta,
        DEFAULT_STEP,
    )?;
    let mut checks = Vec::new();
    let mut offset = 0;
    for (tensor, g) in analytic.tensor_names().into_iter().zip(analytic.tensors()) {
        let worst = g
            .data()
            .iter()
            .zip(&numeric[offset..offset + g.len()])
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max);
        checks.push(TensorCheck {
            model: name.to_string(),
            tensor,
            coordinates: g.len(),
            max_relative_error: worst,
        });
        offset += g.len();
    }
    Ok(checks)
}

/// Runs the check for the single-frame baseline, the LSTM and the MultiLSTM.
pub fn gradcheck_suite(dims: CheckDims, seed: u64, tolerance: f64) -> Result<GradcheckReport> {
    let mut rng = SeededRng::new(seed);
    let video = random_video(&dims, &mut rng);
    let mut checks = Vec::new();

    let mut frame = FrameLogistic::zeros(dims.input, dims.classes);
    randomize(&mut frame, 0.6, &mut rng)?;
    checks.extend(check_model("single-frame", &mut frame, &video)?);

    let mut lstm = LstmParams::zeros(dims.input, dims.hidden, dims.classes);
    randomize(&mut lstm, 0.6, &mut rng)?;
    checks.extend(check_model("lstm", &mut lstm, &video)?);

    let config = MultiLstmConfig {
        input_window: dims.input_window,
        output_window: dims.output_window,
        hidden: dims.hidden,
        attention_units: dims.attention,
        ..MultiLstmConfig::default()
    };
    let mut multi = MultiLstm::zeros(config, dims.input, dims.classes)?;
    randomize(&mut multi.params, 0.6, &mut rng)?;
    checks.extend(check_model("multilstm", &mut multi, &video)?);

    Ok(GradcheckReport { tolerance, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = gradcheck_suite(CheckDims::default(), 7, 1e-4).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
        assert!(report.checks.iter().any(|c| c.model == "multilstm" && c.tensor == "w_ae"));
    }

    #[test]
    fn every_coordinate_is_covered() {
        let dims = CheckDims::default();
        let report = gradcheck_suite(dims, 3, 1e-4).unwrap();
        let lstm = LstmParams::zeros(dims.input, dims.hidden, dims.classes).num_parameters();
        let frame = dims.classes * (dims.input + 1);
        let attention = dims.attention * (1 + dims.hidden + dims.input);
        let extra = (dims.output_window - 1) * dims.classes * (dims.hidden + 1);
        assert_eq!(report.coordinates(), frame + 2 * lstm + attention + extra);
        assert!(report.max_relative_error() < 1e-4);
    }
}
