use crate::error::{Error, Result};
use crate::model::{ChunkOutput, Parameterized, SequenceModel};
use crate::numeric::{Matrix, SeededRng};

/// Per-frame logistic regression: scores `W v_t + b`, no temporal context.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameLogistic {
    pub w: Matrix,
    pub b: Matrix,
}

impl FrameLogistic {
    pub fn zeros(input: usize, classes: usize) -> Self {
        FrameLogistic {
            w: Matrix::zeros(classes, input),
            b: Matrix::zeros(classes, 1),
        }
    }

    pub fn init(input: usize, classes: usize, rng: &mut SeededRng) -> Self {
        FrameLogistic {
            w: Matrix::random_uniform(classes, input, 1.0 / (input as f64).sqrt(), rng),
            b: Matrix::zeros(classes, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn classes(&self) -> usize {
        self.w.rows()
    }
}

impl Parameterized for FrameLogistic {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.w, &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w, &mut self.b]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["w".into(), "b".into()]
    }
}

/// The frames of the last chunk, kept so backward can form `dW`.
pub struct FrameCache {
    features: Matrix,
}

impl SequenceModel for FrameLogistic {
    type Params = FrameLogistic;
    type Carry = ();
    type Cache = FrameCache;

    fn params(&self) -> &FrameLogistic {
        self
    }

    fn params_mut(&mut self) -> &mut FrameLogistic {
        self
    }

    fn input_dim(&self) -> usize {
        FrameLogistic::input_dim(self)
    }

    fn classes(&self) -> usize {
        FrameLogistic::classes(self)
    }

    fn output_window(&self) -> usize {
        1
    }

    fn initial_carry(&self) {}

    fn forward_chunk(&self, features: &Matrix, _carry: &()) -> Result<ChunkOutput<(), FrameCache>> {
        if features.cols() != self.input_dim() {
            return Err(Error::shape("frame_forward", features.shape(), (features.rows(), self.input_dim())));
        }
        let mut scores = Matrix::zeros(features.rows(), self.classes());
        for (t, v) in features.row_iter().enumerate() {
            let row = scores.row_mut(t);
            row.copy_from_slice(self.b.data());
            self.w.matvec_acc(v, row);
        }
        Ok(ChunkOutput {
            head_scores: vec![scores],
            carry: (),
            cache: FrameCache {
                features: features.clone(),
            },
        })
    }

    fn backward_chunk(&self, cache: &FrameCache, d_head_scores: &[Matrix]) -> Result<FrameLogistic> {
        let [d] = d_head_scores else {
            return Err(Error::Consistency("single-frame model has one output head".into()));
        };
        if d.shape() != (cache.features.rows(), self.classes()) {
            return Err(Error::Consistency(format!("head gradient has shape {:?}", d.shape())));
        }
        let mut g = self.zeros_like();
        for (dy, v) in d.row_iter().zip(cache.features.row_iter()) {
            g.w.add_outer(dy, v);
            g.b.add_to_column(dy);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_gradient, relative_error, DEFAULT_STEP};

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(3);
        let m = FrameLogistic::init(4, 3, &mut rng);
        let xs = Matrix::random_uniform(6, 4, 1.0, &mut rng);
        let wts = Matrix::random_uniform(6, 3, 1.0, &mut rng);
        let out = m.forward_chunk(&xs, &()).unwrap();
        let g = m.backward_chunk(&out.cache, &[wts.clone()]).unwrap();
        let mut probe = m.clone();
        let numeric = finite_diff_gradient(
            |theta| {
                probe.assign_flat(theta).unwrap();
                let s = &probe.forward_chunk(&xs, &()).unwrap().head_scores[0];
                s.data().iter().zip(wts.data()).map(|(a, b)| a * b).sum()
            },
            &m.flatten(),
            DEFAULT_STEP,
        )
        .unwrap();
        for (a, n) in g.flatten().iter().zip(numeric) {
            assert!(relative_error(*a, n) < 1e-6);
        }
    }
}
