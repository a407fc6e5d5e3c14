//! Single-hidden-layer LSTM with peephole connections, trained by
//! backpropagation through time.
//!
//! Cell update for one step, with `x` the input and `(h, c)` the previous
//! state (all products element-wise except the `W` matrix-vector ones):
//!
//! ```text
//! i  = sigma(W_xi x + W_hi h + w_ci * c + b_i)
//! f  = sigma(W_xf x + W_hf h + w_cf * c + b_f)
//! c' = f * c + i * g(W_xc x + W_hc h + b_c)
//! o  = sigma(W_xo x + W_ho h + w_co * c + b_o)
//! h' = o * h(c')
//! y  = w_hy . h' + b_y
//! ```
//!
//! `g(x) = 4 sigma(x) - 2` and `h(x) = 2 sigma(x) - 1`. The output gate reads
//! the previous cell state by default; [`OutputPeephole::Current`] switches
//! it to `c'`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synthetic::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

pub fn act_sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn act_g(x: f64) -> f64 {
    4.0 / (1.0 + (-x).exp()) - 2.0
}

pub fn act_h(x: f64) -> f64 {
    2.0 / (1.0 + (-x).exp()) - 1.0
}

/// Which cell state feeds the output-gate peephole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputPeephole {
    #[default]
    Previous,
    Current,
}

/// Network weights. Matrices are stored row-major: `w_xi[r * d + col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct LstmParams {
    input_dim: usize,
    hidden_dim: usize,
    pub output_peephole: OutputPeephole,
    pub w_xi: Vec<f64>,
    pub w_xf: Vec<f64>,
    pub w_xc: Vec<f64>,
    pub w_xo: Vec<f64>,
    pub w_hi: Vec<f64>,
    pub w_hf: Vec<f64>,
    pub w_hc: Vec<f64>,
    pub w_ho: Vec<f64>,
    pub w_ci: Vec<f64>,
    pub w_cf: Vec<f64>,
    pub w_co: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w_hy: Vec<f64>,
    pub b_y: f64,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let (d, m) = (input_dim, hidden_dim);
        Self {
            input_dim,
            hidden_dim,
            output_peephole: OutputPeephole::Previous,
            w_xi: vec![0.0; m * d],
            w_xf: vec![0.0; m * d],
            w_xc: vec![0.0; m * d],
            w_xo: vec![0.0; m * d],
            w_hi: vec![0.0; m * m],
            w_hf: vec![0.0; m * m],
            w_hc: vec![0.0; m * m],
            w_ho: vec![0.0; m * m],
            w_ci: vec![0.0; m],
            w_cf: vec![0.0; m],
            w_co: vec![0.0; m],
            b_i: vec![0.0; m],
            b_f: vec![0.0; m],
            b_c: vec![0.0; m],
            b_o: vec![0.0; m],
            w_hy: vec![0.0; m],
            b_y: 0.0,
        }
    }

    /// Weights uniform on `(-1/sqrt(m), 1/sqrt(m))`, biases zero except the
    /// forget-gate bias, which starts at 1.
    pub fn initialize(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut params = Self::zeros(input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let mut r = rng(seed);
        let weights = params.weight_tensors_mut();
        for tensor in weights {
            for w in tensor.iter_mut() {
                *w = r.random_range(-bound..bound);
            }
        }
        params.b_f.iter_mut().for_each(|b| *b = 1.0);
        params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum::<usize>() + 1
    }

    fn weight_tensors_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.w_xi,
            &mut self.w_xf,
            &mut self.w_xc,
            &mut self.w_xo,
            &mut self.w_hi,
            &mut self.w_hf,
            &mut self.w_hc,
            &mut self.w_ho,
            &mut self.w_ci,
            &mut self.w_cf,
            &mut self.w_co,
            &mut self.w_hy,
        ]
    }

    fn tensors(&self) -> [&Vec<f64>; 16] {
        [
            &self.w_xi, &self.w_xf, &self.w_xc, &self.w_xo, &self.w_hi, &self.w_hf, &self.w_hc, &self.w_ho, &self.w_ci,
            &self.w_cf, &self.w_co, &self.b_i, &self.b_f, &self.b_c, &self.b_o, &self.w_hy,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 16] {
        [
            &mut self.w_xi,
            &mut self.w_xf,
            &mut self.w_xc,
            &mut self.w_xo,
            &mut self.w_hi,
            &mut self.w_hf,
            &mut self.w_hc,
            &mut self.w_ho,
            &mut self.w_ci,
            &mut self.w_cf,
            &mut self.w_co,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
            &mut self.w_hy,
        ]
    }

    /// Every parameter in a fixed order (tensors in field order, `b_y` last).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        out.push(self.b_y);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), LstmError> {
        if flat.len() != self.n_params() {
            return Err(LstmError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut at = 0;
        for tensor in self.tensors_mut() {
            let len = tensor.len();
            tensor.copy_from_slice(&flat[at..at + len]);
            at += len;
        }
        self.b_y = flat[at];
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, scale: f64, other: &LstmParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += scale * b);
        }
        self.b_y += scale * other.b_y;
    }

    fn scale(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            tensor.iter_mut().for_each(|v| *v *= factor);
        }
        self.b_y *= factor;
    }

    fn check_shape(&self) -> Result<(), LstmError> {
        let (d, m) = (self.input_dim, self.hidden_dim);
        let expected = [
            m * d,
            m * d,
            m * d,
            m * d,
            m * m,
            m * m,
            m * m,
            m * m,
            m,
            m,
            m,
            m,
            m,
            m,
            m,
            m,
        ];
        for (i, (t, e)) in self.tensors().iter().zip(expected).enumerate() {
            if t.len() != e {
                return Err(LstmError::ShapeMismatch(format!(
                    "tensor {i} has {} entries, expected {e}",
                    t.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    #[serde(default)]
    output_peephole: OutputPeephole,
    w_xi: Vec<Vec<f64>>,
    w_xf: Vec<Vec<f64>>,
    w_xc: Vec<Vec<f64>>,
    w_xo: Vec<Vec<f64>>,
    w_hi: Vec<Vec<f64>>,
    w_hf: Vec<Vec<f64>>,
    w_hc: Vec<Vec<f64>>,
    w_ho: Vec<Vec<f64>>,
    w_ci: Vec<f64>,
    w_cf: Vec<f64>,
    w_co: Vec<f64>,
    b_i: Vec<f64>,
    b_f: Vec<f64>,
    b_c: Vec<f64>,
    b_o: Vec<f64>,
    w_hy: Vec<Vec<f64>>,
    b_y: Vec<f64>,
}

fn rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    if cols == 0 {
        return Vec::new();
    }
    flat.chunks(cols).map(|r| r.to_vec()).collect()
}

fn unrows(name: &str, rows: Vec<Vec<f64>>, n_rows: usize, n_cols: usize) -> Result<Vec<f64>, String> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(format!("{name} must be {n_rows}x{n_cols}"));
    }
    Ok(rows.into_iter().flatten().collect())
}

impl From<LstmParams> for ParamsRepr {
    fn from(p: LstmParams) -> Self {
        let (d, m) = (p.input_dim, p.hidden_dim);
        Self {
            input_dim: d,
            hidden_dim: m,
            output_dim: 1,
            output_peephole: p.output_peephole,
            w_xi: rows(&p.w_xi, d),
            w_xf: rows(&p.w_xf, d),
            w_xc: rows(&p.w_xc, d),
            w_xo: rows(&p.w_xo, d),
            w_hi: rows(&p.w_hi, m),
            w_hf: rows(&p.w_hf, m),
            w_hc: rows(&p.w_hc, m),
            w_ho: rows(&p.w_ho, m),
            w_ci: p.w_ci,
            w_cf: p.w_cf,
            w_co: p.w_co,
            b_i: p.b_i,
            b_f: p.b_f,
            b_c: p.b_c,
            b_o: p.b_o,
            w_hy: vec![p.w_hy],
            b_y: vec![p.b_y],
        }
    }
}

impl TryFrom<ParamsRepr> for LstmParams {
    type Error = String;

    fn try_from(r: ParamsRepr) -> Result<Self, String> {
        let (d, m) = (r.input_dim, r.hidden_dim);
        if r.output_dim != 1 {
            return Err(format!("output_dim must be 1, got {}", r.output_dim));
        }
        let vector = |name: &str, v: Vec<f64>| {
            if v.len() == m {
                Ok(v)
            } else {
                Err(format!("{name} must have {m} entries"))
            }
        };
        if r.b_y.len() != 1 {
            return Err("b_y must have 1 entry".to_string());
        }
        let params = Self {
            input_dim: d,
            hidden_dim: m,
            output_peephole: r.output_peephole,
            w_xi: unrows("w_xi", r.w_xi, m, d)?,
            w_xf: unrows("w_xf", r.w_xf, m, d)?,
            w_xc: unrows("w_xc", r.w_xc, m, d)?,
            w_xo: unrows("w_xo", r.w_xo, m, d)?,
            w_hi: unrows("w_hi", r.w_hi, m, m)?,
            w_hf: unrows("w_hf", r.w_hf, m, m)?,
            w_hc: unrows("w_hc", r.w_hc, m, m)?,
            w_ho: unrows("w_ho", r.w_ho, m, m)?,
            w_ci: vector("w_ci", r.w_ci)?,
            w_cf: vector("w_cf", r.w_cf)?,
            w_co: vector("w_co", r.w_co)?,
            b_i: vector("b_i", r.b_i)?,
            b_f: vector("b_f", r.b_f)?,
            b_c: vector("b_c", r.b_c)?,
            b_o: vector("b_o", r.b_o)?,
            w_hy: unrows("w_hy", r.w_hy, 1, m)?,
            b_y: r.b_y[0],
        };
        if !params.is_finite() {
            return Err("parameters must be finite".to_string());
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// Inputs `x_1..x_T` with their scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl SupervisedSequence {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, LstmError> {
        if inputs.is_empty() {
            return Err(LstmError::EmptySequence);
        }
        if inputs.len() != targets.len() {
            return Err(LstmError::DimensionMismatch(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let d = inputs[0].len();
        if inputs.iter().any(|x| x.len() != d) {
            return Err(LstmError::DimensionMismatch(
                "inputs have differing lengths".to_string(),
            ));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Everything one step of the forward pass needs to keep for backprop.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    /// `g` applied to the candidate pre-activation.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    /// `h` applied to the new cell state.
    pub hc: Vec<f64>,
    pub h: Vec<f64>,
}

fn matvec(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += w[r * cols..(r + 1) * cols]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
}

fn matvec_t(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &vr) in v.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += a * vr;
        }
    }
}

fn outer_add(dst: &mut [f64], u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (r, &ur) in u.iter().enumerate() {
        for (d, b) in dst[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *d += ur * b;
        }
    }
}

/// One step of the cell. Returns the new state and the backprop cache,
/// whose `i`, `f`, `o` fields are the gate activations.
pub fn cell_forward(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<(LstmState, StepCache), LstmError> {
    params.check_shape()?;
    let (d, m) = (params.input_dim, params.hidden_dim);
    if x.len() != d {
        return Err(LstmError::DimensionMismatch(format!(
            "input has {} entries, expected {d}",
            x.len()
        )));
    }
    if prev.h.len() != m || prev.c.len() != m {
        return Err(LstmError::DimensionMismatch(format!("state must have {m} entries")));
    }
    let pre = |wx: &[f64], wh: &[f64], b: &[f64]| {
        let mut a = b.to_vec();
        matvec(wx, x, &mut a);
        matvec(wh, &prev.h, &mut a);
        a
    };
    let mut a_i = pre(&params.w_xi, &params.w_hi, &params.b_i);
    let mut a_f = pre(&params.w_xf, &params.w_hf, &params.b_f);
    let a_c = pre(&params.w_xc, &params.w_hc, &params.b_c);
    let mut a_o = pre(&params.w_xo, &params.w_ho, &params.b_o);
    for k in 0..m {
        a_i[k] += params.w_ci[k] * prev.c[k];
        a_f[k] += params.w_cf[k] * prev.c[k];
    }
    let i: Vec<f64> = a_i.iter().map(|&v| act_sigma(v)).collect();
    let f: Vec<f64> = a_f.iter().map(|&v| act_sigma(v)).collect();
    let g: Vec<f64> = a_c.iter().map(|&v| act_g(v)).collect();
    let c: Vec<f64> = (0..m).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let peep = match params.output_peephole {
        OutputPeephole::Previous => &prev.c,
        OutputPeephole::Current => &c,
    };
    for k in 0..m {
        a_o[k] += params.w_co[k] * peep[k];
    }
    let o: Vec<f64> = a_o.iter().map(|&v| act_sigma(v)).collect();
    let hc: Vec<f64> = c.iter().map(|&v| act_h(v)).collect();
    let h: Vec<f64> = (0..m).map(|k| o[k] * hc[k]).collect();
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        i,
        f,
        o,
        g,
        c: c.clone(),
        hc,
        h: h.clone(),
    };
    Ok((LstmState { h, c }, cache))
}

fn readout(params: &LstmParams, h: &[f64]) -> f64 {
    params.w_hy.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + params.b_y
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub predictions: Vec<f64>,
    /// Mean squared error over the sequence.
    pub loss: f64,
    pub caches: Vec<StepCache>,
}

/// Unrolls the cell from a zero state over the whole sequence.
pub fn forward_sequence(params: &LstmParams, seq: &SupervisedSequence) -> Result<ForwardPass, LstmError> {
    if seq.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let mut state = LstmState::zeros(params.hidden_dim);
    let mut predictions = Vec::with_capacity(seq.len());
    let mut caches = Vec::with_capacity(seq.len());
    for x in &seq.inputs {
        let (next, cache) = cell_forward(params, x, &state)?;
        predictions.push(readout(params, &next.h));
        caches.push(cache);
        state = next;
    }
    let loss = predictions
        .iter()
        .zip(&seq.targets)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / seq.len() as f64;
    Ok(ForwardPass {
        predictions,
        loss,
        caches,
    })
}

/// Runs the network over `inputs` from a zero state and returns `y_1..y_T`.
pub fn predict(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<Vec<f64>, LstmError> {
    predict_from(params, inputs, LstmState::zeros(params.hidden_dim)).map(|(out, _)| out)
}

/// Like [`predict`] but starting from `state`; also returns the final state.
pub fn predict_from(
    params: &LstmParams,
    inputs: &[Vec<f64>],
    mut state: LstmState,
) -> Result<(Vec<f64>, LstmState), LstmError> {
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, _) = cell_forward(params, x, &state)?;
        out.push(readout(params, &next.h));
        state = next;
    }
    Ok((out, state))
}

/// Mean squared error on `val_seq` when it directly continues `train_seq`:
/// the network state is carried over from the end of the training run.
pub fn continuation_loss(
    params: &LstmParams,
    train_seq: &SupervisedSequence,
    val_seq: &SupervisedSequence,
) -> Result<f64, LstmError> {
    let (_, state) = predict_from(params, &train_seq.inputs, LstmState::zeros(params.hidden_dim))?;
    let (pred, _) = predict_from(params, &val_seq.inputs, state)?;
    Ok(pred
        .iter()
        .zip(&val_seq.targets)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / val_seq.len() as f64)
}

/// Gradient of the forward pass's mean squared error with respect to every
/// parameter.
pub fn backward_sequence(
    params: &LstmParams,
    seq: &SupervisedSequence,
    pass: &ForwardPass,
) -> Result<LstmParams, LstmError> {
    let t_len = seq.len();
    if pass.caches.len() != t_len || pass.predictions.len() != t_len {
        return Err(LstmError::ShapeMismatch(format!(
            "forward pass covers {} steps, sequence has {t_len}",
            pass.caches.len()
        )));
    }
    params.check_shape()?;
    let m = params.hidden_dim;
    let mut grad = LstmParams::zeros(params.input_dim, m);
    grad.output_peephole = params.output_peephole;
    let mut dh_next = vec![0.0; m];
    let mut dc_next = vec![0.0; m];
    let current = params.output_peephole == OutputPeephole::Current;

    for t in (0..t_len).rev() {
        let s = &pass.caches[t];
        let dy = 2.0 * (pass.predictions[t] - seq.targets[t]) / t_len as f64;
        grad.b_y += dy;
        for k in 0..m {
            grad.w_hy[k] += dy * s.h[k];
        }
        let dh: Vec<f64> = (0..m).map(|k| params.w_hy[k] * dy + dh_next[k]).collect();
        let da_o: Vec<f64> = (0..m).map(|k| dh[k] * s.hc[k] * s.o[k] * (1.0 - s.o[k])).collect();
        let dc: Vec<f64> = (0..m)
            .map(|k| {
                // h(c) = 2 sigma(c) - 1, so h'(c) = (1 - h(c)^2) / 2.
                let dhc = 0.5 * (1.0 - s.hc[k] * s.hc[k]);
                let mut v = dc_next[k] + dh[k] * s.o[k] * dhc;
                if current {
                    v += da_o[k] * params.w_co[k];
                }
                v
            })
            .collect();
        let da_i: Vec<f64> = (0..m).map(|k| dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k])).collect();
        let da_f: Vec<f64> = (0..m).map(|k| dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k])).collect();
        // g(a) = 4 sigma(a) - 2, so g'(a) = (4 - g(a)^2) / 4.
        let da_c: Vec<f64> = (0..m)
            .map(|k| dc[k] * s.i[k] * 0.25 * (4.0 - s.g[k] * s.g[k]))
            .collect();

        for (dw, da) in [
            (&mut grad.w_xi, &da_i),
            (&mut grad.w_xf, &da_f),
            (&mut grad.w_xc, &da_c),
            (&mut grad.w_xo, &da_o),
        ] {
            outer_add(dw, da, &s.x);
        }
        for (dw, da) in [
            (&mut grad.w_hi, &da_i),
            (&mut grad.w_hf, &da_f),
            (&mut grad.w_hc, &da_c),
            (&mut grad.w_ho, &da_o),
        ] {
            outer_add(dw, da, &s.h_prev);
        }
        let peep = if current { &s.c } else { &s.c_prev };
        for k in 0..m {
            grad.w_ci[k] += da_i[k] * s.c_prev[k];
            grad.w_cf[k] += da_f[k] * s.c_prev[k];
            grad.w_co[k] += da_o[k] * peep[k];
            grad.b_i[k] += da_i[k];
            grad.b_f[k] += da_f[k];
            grad.b_c[k] += da_c[k];
            grad.b_o[k] += da_o[k];
        }

        dc_next = (0..m)
            .map(|k| {
                let mut v = dc[k] * s.f[k] + da_i[k] * params.w_ci[k] + da_f[k] * params.w_cf[k];
                if !current {
                    v += da_o[k] * params.w_co[k];
                }
                v
            })
            .collect();
        dh_next = vec![0.0; m];
        matvec_t(&params.w_hi, &da_i, &mut dh_next);
        matvec_t(&params.w_hf, &da_f, &mut dh_next);
        matvec_t(&params.w_hc, &da_c, &mut dh_next);
        matvec_t(&params.w_ho, &da_o, &mut dh_next);
    }
    Ok(grad)
}

/// Mean loss and mean gradient over a batch of sequences.
pub fn batch_gradient(params: &LstmParams, batch: &[SupervisedSequence]) -> Result<(f64, LstmParams), LstmError> {
    if batch.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let mut total = LstmParams::zeros(params.input_dim, params.hidden_dim);
    total.output_peephole = params.output_peephole;
    let mut loss = 0.0;
    for seq in batch {
        let pass = forward_sequence(params, seq)?;
        loss += pass.loss;
        total.add_scaled(1.0, &backward_sequence(params, seq, &pass)?);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            clip_norm: 5.0,
            seed: 0,
            patience: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::InvalidConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return bad("clip_norm must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the lowest validation loss.
    pub params: LstmParams,
    pub best_epoch: usize,
    pub history: Vec<EpochLoss>,
}

/// Full-batch gradient descent with gradient-norm clipping. Epoch `e` of the
/// history holds the losses after the `e`-th update. `val_seq` is taken to
/// follow `train_seq` in time, so its loss is measured from the state the
/// training sequence ends in.
pub fn train(
    initial: &LstmParams,
    train_seq: &SupervisedSequence,
    val_seq: &SupervisedSequence,
    config: &TrainConfig,
) -> Result<TrainOutcome, LstmError> {
    config.validate()?;
    let mut params = initial.clone();
    let mut best = (f64::INFINITY, 0, params.clone());
    let mut history = Vec::new();
    for epoch in 1..=config.epochs {
        let (loss, mut grad) = batch_gradient(&params, std::slice::from_ref(train_seq))?;
        if !loss.is_finite() {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        let norm = grad.norm();
        if norm > config.clip_norm {
            grad.scale(config.clip_norm / norm);
        }
        params.add_scaled(-config.learning_rate, &grad);

        let train_loss = forward_sequence(&params, train_seq)?.loss;
        let val_loss = continuation_loss(&params, train_seq, val_seq)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        } else if epoch - best.1 >= config.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        history,
    })
}

pub fn loss_history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in history {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_params(d: usize, m: usize, seed: u64) -> LstmParams {
        let mut p = LstmParams::initialize(d, m, seed);
        let mut r = rng(seed ^ 0x5eed);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = r.random_range(-0.8..0.8));
        }
        p.b_y = r.random_range(-0.5..0.5);
        p
    }

    fn random_seq(d: usize, t: usize, seed: u64) -> SupervisedSequence {
        let mut r = rng(seed);
        let inputs = (0..t)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..t).map(|_| r.random_range(-1.0..1.0)).collect();
        SupervisedSequence::new(inputs, targets).unwrap()
    }

    #[test]
    fn activations_at_zero_and_one() {
        assert_eq!(act_sigma(0.0), 0.5);
        assert_eq!(act_g(0.0), 0.0);
        assert_eq!(act_h(0.0), 0.0);
        assert!((act_g(1.0) - 0.924_234_315_2).abs() < 1e-9);
        assert!((act_g(800.0) - 2.0).abs() < 1e-12);
        assert!((act_h(-800.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_halve_the_cell() {
        let p = LstmParams::zeros(2, 3);
        let prev = LstmState {
            h: vec![0.3, -0.2, 0.1],
            c: vec![1.0, -2.0, 0.5],
        };
        let (state, cache) = cell_forward(&p, &[0.7, -0.1], &prev).unwrap();
        for k in 0..3 {
            assert_eq!(cache.i[k], 0.5);
            assert_eq!(cache.f[k], 0.5);
            assert_eq!(cache.o[k], 0.5);
            assert_eq!(state.c[k], 0.5 * prev.c[k]);
            assert_eq!(state.h[k], 0.5 * act_h(0.5 * prev.c[k]));
        }
        let (state, _) = cell_forward(&p, &[0.7, -0.1], &LstmState::zeros(3)).unwrap();
        assert!(state.h.iter().chain(&state.c).all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = LstmParams::zeros(2, 3);
        assert!(matches!(
            cell_forward(&p, &[1.0], &LstmState::zeros(3)),
            Err(LstmError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_network_predicts_zero() {
        let p = LstmParams::zeros(2, 3);
        let seq = random_seq(2, 6, 3);
        let pass = forward_sequence(&p, &seq).unwrap();
        assert!(pass.predictions.iter().all(|&v| v == 0.0));
        let mean_sq = seq.targets.iter().map(|y| y * y).sum::<f64>() / 6.0;
        assert!((pass.loss - mean_sq).abs() < 1e-15);
    }

    #[test]
    fn zero_target_zero_network_has_zero_gradient() {
        let p = LstmParams::zeros(2, 3);
        let mut seq = random_seq(2, 4, 9);
        seq.targets.iter_mut().for_each(|y| *y = 0.0);
        let pass = forward_sequence(&p, &seq).unwrap();
        let g = backward_sequence(&p, &seq, &pass).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_for_both_peepholes() {
        for peephole in [OutputPeephole::Previous, OutputPeephole::Current] {
            let mut p = random_params(2, 3, 11);
            p.output_peephole = peephole;
            let seq = random_seq(2, 4, 12);
            let (_, g) = batch_gradient(&p, std::slice::from_ref(&seq)).unwrap();
            let fd = crate::oracles::central_difference(
                |flat| {
                    let mut q = p.clone();
                    q.set_flat(flat).unwrap();
                    forward_sequence(&q, &seq).unwrap().loss
                },
                &p.flatten(),
                1e-6,
            );
            for (a, b) in g.flatten().iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{peephole:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn duplicated_batch_keeps_gradient() {
        let p = random_params(2, 3, 4);
        let seq = random_seq(2, 5, 5);
        let (l1, g1) = batch_gradient(&p, std::slice::from_ref(&seq)).unwrap();
        let (l2, g2) = batch_gradient(&p, &[seq.clone(), seq]).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let p = LstmParams::initialize(2, 4, 1);
        let seq = random_seq(2, 10, 2);
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            patience: 10,
            ..TrainConfig::default()
        };
        let out = train(&p, &seq, &seq, &config).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.history.len(), 5);
        assert!(out.history.windows(2).all(|w| w[0].train_loss == w[1].train_loss));
    }

    #[test]
    fn json_round_trip_is_row_major() {
        let p = random_params(2, 3, 8);
        let text = serde_json::to_string(&p).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["w_xi"].as_array().unwrap().len(), 3);
        assert_eq!(value["w_xi"][1][0].as_f64().unwrap(), p.w_xi[2]);
        assert_eq!(value["output_dim"], 1);
        let back: LstmParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn malformed_json_dimensions_are_rejected() {
        let p = random_params(2, 3, 8);
        let mut value = serde_json::to_value(&p).unwrap();
        value["w_hi"][0] = serde_json::json!([1.0]);
        assert!(serde_json::from_value::<LstmParams>(value).is_err());
    }

    #[test]
    fn config_validation() {
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(zero_epochs.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
