//! Single-layer LSTM with a linear read-out, forward pass and BPTT.
//!
//! Per step, with `z = [y_prev, input]`:
//!
//! ```text
//! forget = sig(W_f z + b_f)      input  = sig(W_i z + b_i)
//! cand   = tanh(W_a z + b_a)     output = sig(W_o z + b_o)
//! cell   = forget * cell_prev + input * cand
//! y      = output * tanh(cell)
//! ```
//!
//! All parameters live in one flat vector: for each gate (forget, input,
//! candidate, output) a `hidden x (hidden + 1)` row-major weight matrix whose
//! last column multiplies the scalar input, followed by its bias; then the
//! read-out weights (`hidden`) and read-out bias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    fn name(self) -> &'static str {
        match self {
            Gate::Forget => "forget",
            Gate::Input => "input",
            Gate::Candidate => "candidate",
            Gate::Output => "output",
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    /// Fits to `values`; a zero range falls back to unit range and reports it.
    pub fn fit(values: &[f64]) -> (Self, bool) {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            (Self { min, max }, false)
        } else {
            (Self { min, max: min + 1.0 }, true)
        }
    }

    pub fn identity() -> Self {
        Self { min: 0.0, max: 1.0 }
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCache {
    /// `[y_prev, input]`
    pub concat: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub prev_cell: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    hidden: usize,
    window: usize,
    params: Vec<f64>,
    scaler: Scaler,
}

/// Number of parameters for a given hidden size.
pub fn param_count(hidden: usize) -> usize {
    4 * gate_block(hidden) + hidden + 1
}

fn gate_block(hidden: usize) -> usize {
    hidden * (hidden + 1) + hidden
}

impl LstmModel {
    /// All-zero parameters.
    pub fn zeros(hidden: usize, window: usize) -> Self {
        assert!(hidden > 0 && window > 0);
        Self {
            hidden,
            window,
            params: vec![0.0; param_count(hidden)],
            scaler: Scaler::identity(),
        }
    }

    /// Weights uniform in `[-1/sqrt(H), 1/sqrt(H)]`, zero biases except the
    /// forget-gate bias, which starts at 1.
    pub fn init(hidden: usize, window: usize, seed: u64) -> Self {
        let mut m = Self::zeros(hidden, window);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut rng = Stream::new(seed);
        for g in Gate::ALL {
            let (w, _) = m.gate_range(g);
            for p in &mut m.params[w] {
                *p = rng.uniform_range(-bound, bound);
            }
        }
        let (_, b) = m.gate_range(Gate::Forget);
        m.params[b].fill(1.0);
        let ow = m.readout_range();
        for p in &mut m.params[ow] {
            *p = rng.uniform_range(-bound, bound);
        }
        m
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn scaler(&self) -> Scaler {
        self.scaler
    }

    pub fn set_scaler(&mut self, scaler: Scaler) {
        self.scaler = scaler;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn cols(&self) -> usize {
        self.hidden + 1
    }

    /// Index ranges of a gate's weights and bias inside the flat vector.
    pub fn gate_range(&self, g: Gate) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = g as usize * gate_block(self.hidden);
        let w_end = start + self.hidden * self.cols();
        (start..w_end, w_end..w_end + self.hidden)
    }

    fn readout_range(&self) -> std::ops::Range<usize> {
        let start = 4 * gate_block(self.hidden);
        start..start + self.hidden
    }

    pub fn readout_bias_index(&self) -> usize {
        self.params.len() - 1
    }

    fn gate_preact(&self, g: Gate, concat: &[f64], out: &mut [f64]) {
        let (w, b) = self.gate_range(g);
        let weights = &self.params[w];
        let bias = &self.params[b];
        let cols = self.cols();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &weights[r * cols..(r + 1) * cols];
            *o = bias[r] + row.iter().zip(concat).map(|(w, z)| w * z).sum::<f64>();
        }
    }

    /// One cell step. Inputs are in scaled units.
    pub fn cell_forward(
        &self,
        input: f64,
        prev_hidden: &[f64],
        prev_cell: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, GateCache)> {
        let h = self.hidden;
        if prev_hidden.len() != h || prev_cell.len() != h {
            return Err(Error::SizeMismatch {
                what: "LSTM state",
                expected: h,
                got: if prev_hidden.len() != h {
                    prev_hidden.len()
                } else {
                    prev_cell.len()
                },
            });
        }
        if !input.is_finite() || prev_hidden.iter().chain(prev_cell).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite LSTM input or state".into()));
        }
        let cache = self.step(input, prev_hidden, prev_cell);
        let hidden = cache.output.iter().zip(&cache.tanh_cell).map(|(o, t)| o * t).collect();
        Ok((hidden, cache.cell.clone(), cache))
    }

    fn step(&self, input: f64, prev_hidden: &[f64], prev_cell: &[f64]) -> GateCache {
        let h = self.hidden;
        let mut concat = Vec::with_capacity(h + 1);
        concat.extend_from_slice(prev_hidden);
        concat.push(input);
        let mut pre = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
        for g in Gate::ALL {
            self.gate_preact(g, &concat, &mut pre[g as usize]);
        }
        let [f, i, a, o] = pre;
        let forget: Vec<f64> = f.into_iter().map(sigmoid).collect();
        let input_g: Vec<f64> = i.into_iter().map(sigmoid).collect();
        let candidate: Vec<f64> = a.into_iter().map(f64::tanh).collect();
        let output: Vec<f64> = o.into_iter().map(sigmoid).collect();
        let cell: Vec<f64> = (0..h)
            .map(|k| forget[k] * prev_cell[k] + input_g[k] * candidate[k])
            .collect();
        let tanh_cell = cell.iter().map(|c| c.tanh()).collect();
        GateCache {
            concat,
            forget,
            input: input_g,
            candidate,
            output,
            prev_cell: prev_cell.to_vec(),
            cell,
            tanh_cell,
        }
    }

    /// Runs a scaled window from zero state; returns the scaled prediction.
    pub fn forward(&self, window: &[f64]) -> (f64, Vec<GateCache>) {
        let h = self.hidden;
        let mut hidden = vec![0.0; h];
        let mut cell = vec![0.0; h];
        let mut caches = Vec::with_capacity(window.len());
        for &x in window {
            let c = self.step(x, &hidden, &cell);
            hidden = c.output.iter().zip(&c.tanh_cell).map(|(o, t)| o * t).collect();
            cell.clone_from(&c.cell);
            caches.push(c);
        }
        let ro = &self.params[self.readout_range()];
        let y = self.params[self.readout_bias_index()] + ro.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
        (y, caches)
    }

    /// Accumulates into `grad` the gradient of a loss whose derivative with
    /// respect to the scaled prediction is `d_out`.
    pub fn backward(&self, caches: &[GateCache], d_out: f64, grad: &mut [f64]) {
        self.backward_with(caches, d_out, grad, None);
    }

    pub(crate) fn backward_with(&self, caches: &[GateCache], d_out: f64, grad: &mut [f64], fault: Option<Gate>) {
        let h = self.hidden;
        let cols = self.cols();
        let Some(last) = caches.last() else {
            grad[self.readout_bias_index()] += d_out;
            return;
        };

        let ro = self.readout_range();
        let mut dh = vec![0.0; h];
        for k in 0..h {
            let y = last.output[k] * last.tanh_cell[k];
            grad[ro.start + k] += d_out * y;
            dh[k] = d_out * self.params[ro.start + k];
        }
        grad[self.readout_bias_index()] += d_out;

        let mut dc_next = vec![0.0; h];
        let mut dz = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
        for c in caches.iter().rev() {
            for k in 0..h {
                let (f, i, a, o, t) = (c.forget[k], c.input[k], c.candidate[k], c.output[k], c.tanh_cell[k]);
                let d_o = dh[k] * t;
                let dc = dh[k] * o * (1.0 - t * t) + dc_next[k];
                let d_f = dc * c.prev_cell[k];
                let d_i = dc * a;
                let d_a = dc * i;
                dc_next[k] = dc * f;
                dz[0][k] = d_f * f * (1.0 - f);
                dz[1][k] = d_i * i * (1.0 - i);
                dz[2][k] = d_a * (1.0 - a * a);
                dz[3][k] = d_o * o * (1.0 - o);
                if let Some(g) = fault {
                    // Mutation hook: drop the activation derivative of one gate.
                    dz[g as usize][k] = match g {
                        Gate::Forget => d_f,
                        Gate::Input => d_i,
                        Gate::Candidate => d_a,
                        Gate::Output => d_o,
                    };
                }
            }
            let mut d_concat = vec![0.0; cols];
            for g in Gate::ALL {
                let (w, b) = self.gate_range(g);
                let dzg = &dz[g as usize];
                for r in 0..h {
                    let d = dzg[r];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b.start + r] += d;
                    let row = w.start + r * cols;
                    for (j, z) in c.concat.iter().enumerate() {
                        grad[row + j] += d * z;
                        d_concat[j] += self.params[row + j] * d;
                    }
                }
            }
            dh.copy_from_slice(&d_concat[..h]);
        }
    }

    /// Squared error of one scaled window and its gradient.
    pub fn loss_and_grad(&self, window: &[f64], target: f64, grad: &mut [f64]) -> f64 {
        let (y, caches) = self.forward(window);
        let diff = y - target;
        self.backward(&caches, 2.0 * diff, grad);
        diff * diff
    }
}

/// Maximum relative disagreement between BPTT gradients of the squared error
/// and central finite differences (step `1e-5`), over every parameter.
/// `window` and `target` are in scaled units.
pub fn grad_check(model: &LstmModel, window: &[f64], target: f64) -> f64 {
    grad_check_with(model, window, target, None)
}

pub(crate) fn grad_check_with(model: &LstmModel, window: &[f64], target: f64, fault: Option<Gate>) -> f64 {
    const STEP: f64 = 1e-5;
    let mut analytic = vec![0.0; model.params.len()];
    let (y, caches) = model.forward(window);
    model.backward_with(&caches, 2.0 * (y - target), &mut analytic, fault);

    let loss = |m: &LstmModel| {
        let (y, _) = m.forward(window);
        (y - target) * (y - target)
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (p, &ga) in analytic.iter().enumerate() {
        let orig = probe.params[p];
        probe.params[p] = orig + STEP;
        let up = loss(&probe);
        probe.params[p] = orig - STEP;
        let down = loss(&probe);
        probe.params[p] = orig;
        let gn = (up - down) / (2.0 * STEP);
        let rel = (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Portable model file: gate matrices are `H x (H + 1)` row-major with the
/// scalar-input column last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "H")]
    pub hidden: usize,
    pub window: usize,
    pub scaler: Scaler,
    pub forget: GateParams,
    pub input: GateParams,
    pub candidate: GateParams,
    pub output: GateParams,
    pub readout: ReadoutParams,
}

impl From<&LstmModel> for ModelFile {
    fn from(m: &LstmModel) -> Self {
        let gate = |g| {
            let (w, b) = m.gate_range(g);
            GateParams {
                weights: m.params[w].to_vec(),
                bias: m.params[b].to_vec(),
            }
        };
        ModelFile {
            hidden: m.hidden,
            window: m.window,
            scaler: m.scaler,
            forget: gate(Gate::Forget),
            input: gate(Gate::Input),
            candidate: gate(Gate::Candidate),
            output: gate(Gate::Output),
            readout: ReadoutParams {
                weights: m.params[m.readout_range()].to_vec(),
                bias: m.params[m.readout_bias_index()],
            },
        }
    }
}

impl TryFrom<ModelFile> for LstmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.hidden == 0 || f.window == 0 {
            return Err(Error::InvalidInput(
                "model hidden size and window must be positive".into(),
            ));
        }
        if !(f.scaler.min.is_finite() && f.scaler.max.is_finite() && f.scaler.max > f.scaler.min) {
            return Err(Error::InvalidInput(format!("invalid scaler {:?}", f.scaler)));
        }
        let mut m = LstmModel::zeros(f.hidden, f.window);
        m.scaler = f.scaler;
        for (g, p) in Gate::ALL
            .into_iter()
            .zip([&f.forget, &f.input, &f.candidate, &f.output])
        {
            let (w, b) = m.gate_range(g);
            if p.weights.len() != w.len() || p.bias.len() != b.len() {
                return Err(Error::InvalidInput(format!(
                    "{} gate expects {} weights and {} biases",
                    g.name(),
                    w.len(),
                    b.len()
                )));
            }
            m.params[w].copy_from_slice(&p.weights);
            m.params[b].copy_from_slice(&p.bias);
        }
        let ro = m.readout_range();
        if f.readout.weights.len() != ro.len() {
            return Err(Error::InvalidInput(format!(
                "readout expects {} weights, got {}",
                ro.len(),
                f.readout.weights.len()
            )));
        }
        m.params[ro].copy_from_slice(&f.readout.weights);
        let bias = m.readout_bias_index();
        m.params[bias] = f.readout.bias;
        if m.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("model contains non-finite parameters".into()));
        }
        Ok(m)
    }
}
