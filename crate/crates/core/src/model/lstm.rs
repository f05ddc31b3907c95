use crate::error::{Error, Result};
use crate::model::{ChunkOutput, Parameterized, SequenceModel};
use crate::numeric::{sigmoid, Matrix, SeededRng};

/// Gate weights (`H x D`, `H x H`), gate biases (`H x 1`) and the output
/// projection (`C x H`, `C x 1`) of a single-layer LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub b_i: Matrix,
    pub w_xf: Matrix,
    pub w_hf: Matrix,
    pub b_f: Matrix,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub b_o: Matrix,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub b_c: Matrix,
    pub w_hy: Matrix,
    pub b_y: Matrix,
}

/// Initial forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        let (d, h, c) = (input, hidden, classes);
        LstmParams {
            w_xi: Matrix::zeros(h, d),
            w_hi: Matrix::zeros(h, h),
            b_i: Matrix::zeros(h, 1),
            w_xf: Matrix::zeros(h, d),
            w_hf: Matrix::zeros(h, h),
            b_f: Matrix::zeros(h, 1),
            w_xo: Matrix::zeros(h, d),
            w_ho: Matrix::zeros(h, h),
            b_o: Matrix::zeros(h, 1),
            w_xc: Matrix::zeros(h, d),
            w_hc: Matrix::zeros(h, h),
            b_c: Matrix::zeros(h, 1),
            w_hy: Matrix::zeros(c, h),
            b_y: Matrix::zeros(c, 1),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)` (gate fan-in is `D + H`), biases
    /// zero except the forget gate.
    pub fn init(input: usize, hidden: usize, classes: usize, rng: &mut SeededRng) -> Self {
        let (d, h, c) = (input, hidden, classes);
        let gate = 1.0 / ((d + h) as f64).sqrt();
        let out = 1.0 / (h as f64).sqrt();
        let mut p = LstmParams::zeros(d, h, c);
        for w in [
            &mut p.w_xi, &mut p.w_hi, &mut p.w_xf, &mut p.w_hf, &mut p.w_xo, &mut p.w_ho, &mut p.w_xc, &mut p.w_hc,
        ] {
            *w = Matrix::random_uniform(w.rows(), w.cols(), gate, rng);
        }
        p.w_hy = Matrix::random_uniform(c, h, out, rng);
        p.b_f.fill(FORGET_BIAS_INIT);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hi.rows()
    }

    pub fn classes(&self) -> usize {
        self.w_hy.rows()
    }

    /// Checks every tensor's shape against (D, H, C) from the input gate.
    pub fn validate(&self) -> Result<()> {
        let (d, h, c) = (self.input_dim(), self.hidden_dim(), self.classes());
        let expected = LstmParams::zeros(d, h, c);
        for ((name, got), want) in self.tensor_names().iter().zip(self.tensors()).zip(expected.tensors()) {
            if got.shape() != want.shape() {
                return Err(Error::Consistency(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        Ok(())
    }
}

impl Parameterized for LstmParams {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![
            &self.w_xi, &self.w_hi, &self.b_i, &self.w_xf, &self.w_hf, &self.b_f, &self.w_xo, &self.w_ho,
            &self.b_o, &self.w_xc, &self.w_hc, &self.b_c, &self.w_hy, &self.b_y,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.w_xi, &mut self.w_hi, &mut self.b_i, &mut self.w_xf, &mut self.w_hf, &mut self.b_f,
            &mut self.w_xo, &mut self.w_ho, &mut self.b_o, &mut self.w_xc, &mut self.w_hc, &mut self.b_c,
            &mut self.w_hy, &mut self.b_y,
        ]
    }

    fn tensor_names(&self) -> Vec<String> {
        [
            "w_xi", "w_hi", "b_i", "w_xf", "w_hf", "b_f", "w_xo", "w_ho", "b_o", "w_xc", "w_hc", "b_c", "w_hy", "b_y",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Clone, Debug)]
pub struct GateActivations {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Argument(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn gate(w_x: &Matrix, w_h: &Matrix, b: &Matrix, x: &[f64], h: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    let mut z = b.data().to_vec();
    w_x.matvec_acc(x, &mut z);
    w_h.matvec_acc(h, &mut z);
    z.iter_mut().for_each(|v| *v = act(*v));
    z
}

/// Recurrent cell update without the output projection.
pub(crate) fn cell_forward(p: &LstmParams, x: &[f64], state: &LstmState) -> Result<GateActivations> {
    check_len("input vector", x.len(), p.input_dim())?;
    check_len("hidden state", state.h.len(), p.hidden_dim())?;
    check_len("cell state", state.c.len(), p.hidden_dim())?;
    let i = gate(&p.w_xi, &p.w_hi, &p.b_i, x, &state.h, sigmoid);
    let f = gate(&p.w_xf, &p.w_hf, &p.b_f, x, &state.h, sigmoid);
    let o = gate(&p.w_xo, &p.w_ho, &p.b_o, x, &state.h, sigmoid);
    let g = gate(&p.w_xc, &p.w_hc, &p.b_c, x, &state.h, f64::tanh);
    let c: Vec<f64> = (0..g.len()).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    Ok(GateActivations {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        h,
    })
}

/// Backpropagates `dh`/`dc` (w.r.t. this step's outputs) through one cell
/// update, accumulating into `grads`. Returns `(dh_prev, dc_prev, dx)`.
pub(crate) fn cell_backward(
    p: &LstmParams,
    a: &GateActivations,
    dh: &[f64],
    dc_next: &[f64],
    grads: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hidden = a.h.len();
    let mut da_i = vec![0.0; hidden];
    let mut da_f = vec![0.0; hidden];
    let mut da_o = vec![0.0; hidden];
    let mut da_g = vec![0.0; hidden];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let d_o = dh[k] * a.tanh_c[k];
        let dc = dh[k] * a.o[k] * (1.0 - a.tanh_c[k] * a.tanh_c[k]) + dc_next[k];
        da_i[k] = dc * a.g[k] * a.i[k] * (1.0 - a.i[k]);
        da_f[k] = dc * a.c_prev[k] * a.f[k] * (1.0 - a.f[k]);
        da_o[k] = d_o * a.o[k] * (1.0 - a.o[k]);
        da_g[k] = dc * a.i[k] * (1.0 - a.g[k] * a.g[k]);
        dc_prev[k] = dc * a.f[k];
    }

    let mut dh_prev = vec![0.0; hidden];
    let mut dx = vec![0.0; a.x.len()];
    let blocks = [
        (&da_i, &p.w_xi, &p.w_hi),
        (&da_f, &p.w_xf, &p.w_hf),
        (&da_o, &p.w_xo, &p.w_ho),
        (&da_g, &p.w_xc, &p.w_hc),
    ];
    for (da, w_x, w_h) in blocks {
        w_x.matvec_t_acc(da, &mut dx);
        w_h.matvec_t_acc(da, &mut dh_prev);
    }
    grads.w_xi.add_outer(&da_i, &a.x);
    grads.w_hi.add_outer(&da_i, &a.h_prev);
    grads.b_i.add_to_column(&da_i);
    grads.w_xf.add_outer(&da_f, &a.x);
    grads.w_hf.add_outer(&da_f, &a.h_prev);
    grads.b_f.add_to_column(&da_f);
    grads.w_xo.add_outer(&da_o, &a.x);
    grads.w_ho.add_outer(&da_o, &a.h_prev);
    grads.b_o.add_to_column(&da_o);
    grads.w_xc.add_outer(&da_g, &a.x);
    grads.w_hc.add_outer(&da_g, &a.h_prev);
    grads.b_c.add_to_column(&da_g);
    (dh_prev, dc_prev, dx)
}

pub(crate) fn project(w: &Matrix, b: &Matrix, h: &[f64]) -> Vec<f64> {
    let mut y = b.data().to_vec();
    w.matvec_acc(h, &mut y);
    y
}

/// One LSTM step: new state, class scores, cached activations.
pub fn lstm_step(p: &LstmParams, x: &[f64], state: &LstmState) -> Result<(LstmState, Vec<f64>, GateActivations)> {
    let acts = cell_forward(p, x, state)?;
    let y = project(&p.w_hy, &p.b_y, &acts.h);
    let next = LstmState {
        h: acts.h.clone(),
        c: acts.c.clone(),
    };
    Ok((next, y, acts))
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    pub steps: Vec<GateActivations>,
}

#[derive(Clone, Debug)]
pub struct LstmForward {
    /// `T x C` raw scores.
    pub ys: Matrix,
    pub final_state: LstmState,
    pub cache: LstmCache,
}

/// Runs the LSTM over the rows of `xs` (`T x D`) starting from `init`.
pub fn lstm_forward(p: &LstmParams, xs: &Matrix, init: &LstmState) -> Result<LstmForward> {
    if xs.rows() == 0 {
        return Err(Error::Argument("LSTM forward needs at least one frame".into()));
    }
    if xs.cols() != p.input_dim() {
        return Err(Error::shape("lstm_forward", xs.shape(), (xs.rows(), p.input_dim())));
    }
    let mut state = init.clone();
    let mut ys = Matrix::zeros(xs.rows(), p.classes());
    let mut steps = Vec::with_capacity(xs.rows());
    for t in 0..xs.rows() {
        let (next, y, acts) = lstm_step(p, xs.row(t), &state)?;
        ys.row_mut(t).copy_from_slice(&y);
        steps.push(acts);
        state = next;
    }
    Ok(LstmForward {
        ys,
        final_state: state,
        cache: LstmCache { steps },
    })
}

/// Gradients of all parameters and of the initial state, given `dL/dys`.
pub fn lstm_backward(p: &LstmParams, cache: &LstmCache, d_ys: &Matrix) -> Result<(LstmParams, LstmState)> {
    let (_, grads, d_init) = lstm_backward_with_inputs(p, cache, d_ys)?;
    Ok((grads, d_init))
}

/// As [`lstm_backward`], also returning `dL/dxs`.
pub(crate) fn lstm_backward_with_inputs(
    p: &LstmParams,
    cache: &LstmCache,
    d_ys: &Matrix,
) -> Result<(Matrix, LstmParams, LstmState)> {
    let steps = cache.steps.len();
    if d_ys.shape() != (steps, p.classes()) {
        return Err(Error::Consistency(format!(
            "upstream gradient has shape {:?} but the cache holds {steps} steps of {} classes",
            d_ys.shape(),
            p.classes()
        )));
    }
    if let Some(first) = cache.steps.first() {
        if first.x.len() != p.input_dim() || first.h.len() != p.hidden_dim() {
            return Err(Error::Consistency("cache was produced by parameters of a different shape".into()));
        }
    }
    let hidden = p.hidden_dim();
    let mut grads = p.zeros_like();
    let mut d_xs = Matrix::zeros(steps, p.input_dim());
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for t in (0..steps).rev() {
        let acts = &cache.steps[t];
        let dy = d_ys.row(t);
        grads.w_hy.add_outer(dy, &acts.h);
        grads.b_y.add_to_column(dy);
        let mut dh = dh_next;
        p.w_hy.matvec_t_acc(dy, &mut dh);
        let (dh_prev, dc_prev, dx) = cell_backward(p, acts, &dh, &dc_next, &mut grads);
        d_xs.row_mut(t).copy_from_slice(&dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Ok((d_xs, grads, LstmState { h: dh_next, c: dc_next }))
}

impl SequenceModel for LstmParams {
    type Params = LstmParams;
    type Carry = LstmState;
    type Cache = LstmCache;

    fn params(&self) -> &LstmParams {
        self
    }

    fn params_mut(&mut self) -> &mut LstmParams {
        self
    }

    fn input_dim(&self) -> usize {
        LstmParams::input_dim(self)
    }

    fn classes(&self) -> usize {
        LstmParams::classes(self)
    }

    fn output_window(&self) -> usize {
        1
    }

    fn initial_carry(&self) -> LstmState {
        LstmState::zeros(self.hidden_dim())
    }

    fn forward_chunk(&self, features: &Matrix, carry: &LstmState) -> Result<ChunkOutput<LstmState, LstmCache>> {
        let out = lstm_forward(self, features, carry)?;
        Ok(ChunkOutput {
            head_scores: vec![out.ys],
            carry: out.final_state,
            cache: out.cache,
        })
    }

    fn backward_chunk(&self, cache: &LstmCache, d_head_scores: &[Matrix]) -> Result<LstmParams> {
        match d_head_scores {
            [d] => Ok(lstm_backward(self, cache, d)?.0),
            _ => Err(Error::Consistency(format!(
                "LSTM has one output head, got {} gradients",
                d_head_scores.len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_gradient, relative_error, DEFAULT_STEP};
    use proptest::prelude::*;

    fn random_params(d: usize, h: usize, c: usize, scale: f64, rng: &mut SeededRng) -> LstmParams {
        let mut p = LstmParams::zeros(d, h, c);
        for t in p.tensors_mut() {
            *t = Matrix::random_uniform(t.rows(), t.cols(), scale, rng);
        }
        p
    }

    fn naive_sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Direct transcription of the gate equations with explicit loops.
    fn reference_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hid = h.len();
        let affine = |wx: &Matrix, wh: &Matrix, b: &Matrix, k: usize| {
            let mut s = b.get(k, 0);
            for j in 0..x.len() {
                s += wx.get(k, j) * x[j];
            }
            for j in 0..hid {
                s += wh.get(k, j) * h[j];
            }
            s
        };
        let mut c_new = vec![0.0; hid];
        let mut h_new = vec![0.0; hid];
        for k in 0..hid {
            let i = naive_sigmoid(affine(&p.w_xi, &p.w_hi, &p.b_i, k));
            let f = naive_sigmoid(affine(&p.w_xf, &p.w_hf, &p.b_f, k));
            let o = naive_sigmoid(affine(&p.w_xo, &p.w_ho, &p.b_o, k));
            let g = affine(&p.w_xc, &p.w_hc, &p.b_c, k).tanh();
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        let y = (0..p.classes())
            .map(|r| p.b_y.get(r, 0) + (0..hid).map(|k| p.w_hy.get(r, k) * h_new[k]).sum::<f64>())
            .collect();
        (h_new, c_new, y)
    }

    #[test]
    fn zero_weights_fixed_point() {
        let p = LstmParams::zeros(3, 4, 2);
        let (next, y, acts) = lstm_step(&p, &[0.3, -2.0, 5.0], &LstmState::zeros(4)).unwrap();
        assert!(acts.i.iter().chain(&acts.f).chain(&acts.o).all(|&v| v == 0.5));
        assert!(acts.g.iter().all(|&v| v == 0.0));
        assert!(next.c.iter().chain(&next.h).chain(&y).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut rng = SeededRng::new(21);
        let mut p = random_params(3, 4, 2, 0.5, &mut rng);
        p.b_f.fill(50.0);
        let state = LstmState {
            h: vec![0.1, -0.2, 0.3, 0.0],
            c: vec![1.5, -0.7, 0.2, 3.0],
        };
        let (next, _, acts) = lstm_step(&p, &[0.5, 0.1, -0.4], &state).unwrap();
        for k in 0..4 {
            let expect = state.c[k] + acts.i[k] * acts.g[k];
            assert!((next.c[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn step_matches_reference_transcription() {
        let mut rng = SeededRng::new(17);
        let p = random_params(3, 2, 2, 0.8, &mut rng);
        let x = [0.4, -1.1, 0.25];
        let state = LstmState {
            h: vec![0.2, -0.5],
            c: vec![0.7, 0.1],
        };
        let (next, y, _) = lstm_step(&p, &x, &state).unwrap();
        let (h_ref, c_ref, y_ref) = reference_step(&p, &x, &state.h, &state.c);
        for (a, b) in next.h.iter().zip(&h_ref).chain(next.c.iter().zip(&c_ref)).chain(y.iter().zip(&y_ref)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(3, 4, 2);
        assert!(matches!(lstm_step(&p, &[1.0], &LstmState::zeros(4)), Err(Error::Argument(_))));
        assert!(lstm_step(&p, &[1.0; 3], &LstmState::zeros(5)).is_err());
        assert!(lstm_forward(&p, &Matrix::zeros(0, 3), &LstmState::zeros(4)).is_err());
        assert!(matches!(
            lstm_forward(&p, &Matrix::zeros(2, 5), &LstmState::zeros(4)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn single_step_sequence_equals_step() {
        let mut rng = SeededRng::new(2);
        let p = LstmParams::init(3, 4, 2, &mut rng);
        let xs = Matrix::random_uniform(1, 3, 1.0, &mut rng);
        let fwd = lstm_forward(&p, &xs, &LstmState::zeros(4)).unwrap();
        let (state, y, _) = lstm_step(&p, xs.row(0), &LstmState::zeros(4)).unwrap();
        assert_eq!(fwd.ys.row(0), &y[..]);
        assert_eq!(fwd.final_state, state);
    }

    #[test]
    fn zero_params_zero_scores() {
        let mut rng = SeededRng::new(2);
        let xs = Matrix::random_uniform(6, 3, 1.0, &mut rng);
        let fwd = lstm_forward(&LstmParams::zeros(3, 4, 2), &xs, &LstmState::zeros(4)).unwrap();
        assert!(fwd.ys.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chunked_forward_is_bit_exact() {
        let mut rng = SeededRng::new(8);
        let p = LstmParams::init(4, 6, 3, &mut rng);
        let xs = Matrix::random_uniform(20, 4, 2.0, &mut rng);
        let full = lstm_forward(&p, &xs, &LstmState::zeros(6)).unwrap();
        for k in 1..20 {
            let a = lstm_forward(&p, &xs.slice_rows(0, k), &LstmState::zeros(6)).unwrap();
            let b = lstm_forward(&p, &xs.slice_rows(k, 20), &a.final_state).unwrap();
            assert_eq!(Matrix::vstack(&[a.ys, b.ys]).unwrap(), full.ys);
            assert_eq!(b.final_state, full.final_state);
        }
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = SeededRng::new(8);
        let p = LstmParams::init(4, 5, 3, &mut rng);
        let xs = Matrix::random_uniform(7, 4, 1.0, &mut rng);
        let fwd = lstm_forward(&p, &xs, &LstmState::zeros(5)).unwrap();
        let (g, d_init) = lstm_backward(&p, &fwd.cache, &Matrix::zeros(7, 3)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(d_init.h.iter().chain(&d_init.c).all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mut rng = SeededRng::new(9);
        let p = LstmParams::init(4, 5, 3, &mut rng);
        let xs = Matrix::random_uniform(7, 4, 1.0, &mut rng);
        let fwd = lstm_forward(&p, &xs, &LstmState::zeros(5)).unwrap();
        let dy = Matrix::random_uniform(7, 3, 1.0, &mut rng);
        let mut dy2 = dy.clone();
        dy2.scale(2.0);
        let (g1, _) = lstm_backward(&p, &fwd.cache, &dy).unwrap();
        let (g2, _) = lstm_backward(&p, &fwd.cache, &dy2).unwrap();
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let mut rng = SeededRng::new(9);
        let p = LstmParams::init(4, 5, 3, &mut rng);
        let xs = Matrix::random_uniform(7, 4, 1.0, &mut rng);
        let fwd = lstm_forward(&p, &xs, &LstmState::zeros(5)).unwrap();
        assert!(matches!(
            lstm_backward(&p, &fwd.cache, &Matrix::zeros(6, 3)),
            Err(Error::Consistency(_))
        ));
        let other = LstmParams::init(4, 6, 3, &mut rng);
        assert!(lstm_backward(&other, &fwd.cache, &Matrix::zeros(7, 3)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (d, h, c, t) = (4, 5, 3, 7);
        let mut rng = SeededRng::new(7);
        let p = random_params(d, h, c, 0.6, &mut rng);
        let xs = Matrix::random_uniform(t, d, 1.0, &mut rng);
        let init = LstmState {
            h: (0..h).map(|_| rng.uniform(-0.5, 0.5)).collect(),
            c: (0..h).map(|_| rng.uniform(-0.5, 0.5)).collect(),
        };
        let weights = Matrix::random_uniform(t, c, 1.0, &mut rng);
        let loss = |q: &LstmParams| -> f64 {
            let out = lstm_forward(q, &xs, &init).unwrap();
            out.ys.data().iter().zip(weights.data()).map(|(y, w)| y * w).sum()
        };
        let fwd = lstm_forward(&p, &xs, &init).unwrap();
        let (grads, _) = lstm_backward(&p, &fwd.cache, &weights).unwrap();
        let mut probe = p.clone();
        let numeric = finite_diff_gradient(
            |theta| {
                probe.assign_flat(theta).unwrap();
                loss(&probe)
            },
            &p.flatten(),
            DEFAULT_STEP,
        )
        .unwrap();
        for (i, (a, n)) in grads.flatten().iter().zip(&numeric).enumerate() {
            assert!(relative_error(*a, *n) < 1e-4, "coordinate {i}: {a} vs {n}");
        }
    }

    proptest! {
        #[test]
        fn gates_stay_in_range(seed in 0u64..5000, scale in 0.1f64..20.0) {
            let mut rng = SeededRng::new(seed);
            let p = random_params(3, 4, 2, scale, &mut rng);
            let xs = Matrix::random_uniform(5, 3, scale, &mut rng);
            let fwd = lstm_forward(&p, &xs, &LstmState::zeros(4)).unwrap();
            for a in &fwd.cache.steps {
                prop_assert!(a.i.iter().chain(&a.f).chain(&a.o).all(|&v| (0.0..=1.0).contains(&v)));
                prop_assert!(a.g.iter().all(|&v| (-1.0..=1.0).contains(&v)));
                prop_assert!(a.h.iter().all(|&v| v.abs() <= 1.0));
            }
            prop_assert!(fwd.ys.is_finite());
        }
    }
}
