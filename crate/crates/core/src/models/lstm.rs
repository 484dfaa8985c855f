//! Stacked LSTM with a dense multi-horizon head, trained by full
//! backpropagation through time with Adam.

use serde::{Deserialize, Serialize};

use super::window::select_columns;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::series::{FeatureFrame, MinMaxScaler, PRICE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub layers: usize,
    pub hidden_size: usize,
    pub dropout_rate: f64,
    pub output_size: usize,
    pub lookback_window: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    /// Fraction of samples (taken from the end) used for early stopping.
    pub validation_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for LstmParams {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 10,
            layers: 4,
            hidden_size: 50,
            dropout_rate: 0.2,
            output_size: 52,
            lookback_window: 52,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 5.0,
            validation_fraction: 0.1,
            patience: 10,
            seed: 0,
        }
    }
}

impl LstmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.layers == 0 || self.hidden_size == 0 {
            return bad("layers", "need at least one layer of at least one unit");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", "must lie in [0, 1)");
        }
        if self.output_size == 0 {
            return bad("output_size", "must be at least 1");
        }
        if self.lookback_window == 0 {
            return bad("lookback_window", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction", "must lie in [0, 1)");
        }
        Ok(())
    }
}

/// `C = op(A) * op(B) + beta * C` for row-major operands; `op` transposes
/// when the flag is set. `op(A)` is `m x k`, `op(B)` is `k x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], at: bool, b: &[f64], bt: bool, beta: f64, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if at { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if bt { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // elements checked against the slice lengths.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverted-dropout mask: each element is kept with probability `1 - rate`
/// and scaled by `1 / (1 - rate)`.
pub fn dropout_mask(rng: &mut CounterRng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect()
}

/// Offsets of one layer's tensors inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    input: usize,
    w: usize,
    u: usize,
    b: usize,
}

/// Network weights stored in one flat vector. Per layer: `W` (input x 4H),
/// `U` (H x 4H), `b` (4H) with gate blocks ordered input, forget, cell,
/// output; then the dense head `V` (H x O) and `c` (O).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NamedTensors", try_from = "NamedTensors")]
pub struct LstmNetwork {
    pub input_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub output_size: usize,
    pub params: Vec<f64>,
}

/// One named weight array with its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensors {
    pub input_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub output_size: usize,
    pub tensors: Vec<Tensor>,
}

impl From<LstmNetwork> for NamedTensors {
    fn from(net: LstmNetwork) -> Self {
        let tensors = net.tensors();
        Self {
            input_size: net.input_size,
            hidden_size: net.hidden_size,
            layers: net.layers,
            output_size: net.output_size,
            tensors,
        }
    }
}

impl TryFrom<NamedTensors> for LstmNetwork {
    type Error = Error;

    fn try_from(t: NamedTensors) -> Result<Self> {
        let mut net = LstmNetwork::zeros(t.input_size, t.hidden_size, t.layers, t.output_size);
        let expected = net.tensors();
        if expected.len() != t.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                t.tensors.len()
            )));
        }
        let mut at = 0;
        for (want, got) in expected.iter().zip(&t.tensors) {
            if want.name != got.name || want.shape != got.shape || got.data.len() != want.data.len() {
                return Err(Error::ShapeMismatch(format!("tensor {} has unexpected name or shape", got.name)));
            }
            net.params[at..at + got.data.len()].copy_from_slice(&got.data);
            at += got.data.len();
        }
        Ok(net)
    }
}

/// Activations kept from the forward pass of one layer.
struct LayerCache {
    /// T x B x D
    input: Vec<f64>,
    /// T x B x 4H, post-activation
    gates: Vec<f64>,
    /// (T+1) x B x H, starting from zero state
    cells: Vec<f64>,
    hidden: Vec<f64>,
    /// T x B x H
    tanh_c: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// A batch laid out time-major: `inputs[t][b][d]` flattened.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub size: usize,
    pub steps: usize,
}

impl LstmNetwork {
    fn layout(&self, l: usize) -> LayerLayout {
        let h4 = 4 * self.hidden_size;
        let mut at = 0;
        let mut input = self.input_size;
        for i in 0..=l {
            let w = at;
            let u = w + input * h4;
            let b = u + self.hidden_size * h4;
            if i == l {
                return LayerLayout { input, w, u, b };
            }
            at = b + h4;
            input = self.hidden_size;
        }
        unreachable!()
    }

    fn dense_offset(&self) -> usize {
        let last = self.layout(self.layers - 1);
        last.b + 4 * self.hidden_size
    }

    fn param_count(input: usize, hidden: usize, layers: usize, output: usize) -> usize {
        let h4 = 4 * hidden;
        (input + hidden + 1) * h4 + (layers - 1) * (2 * hidden + 1) * h4 + hidden * output + output
    }

    pub fn zeros(input_size: usize, hidden_size: usize, layers: usize, output_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            layers,
            output_size,
            params: vec![0.0; Self::param_count(input_size, hidden_size, layers, output_size)],
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, zero biases except the forget
    /// gate at 1.
    pub fn init(input_size: usize, hidden_size: usize, layers: usize, output_size: usize, seed: u64) -> Self {
        let mut net = Self::zeros(input_size, hidden_size, layers, output_size);
        let mut rng = CounterRng::with_stream(seed, u64::MAX);
        let h = hidden_size;
        let mut uniform = |slice: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in slice {
                *v = (2.0 * rng.next_f64() - 1.0) * bound;
            }
        };
        for l in 0..layers {
            let lay = net.layout(l);
            uniform(&mut net.params[lay.w..lay.u], lay.input);
            uniform(&mut net.params[lay.u..lay.b], h);
            net.params[lay.b + h..lay.b + 2 * h].fill(1.0);
        }
        let d = net.dense_offset();
        uniform(&mut net.params[d..d + h * output_size], h);
        net
    }

    /// Weights as named arrays with shapes, in storage order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let h4 = 4 * self.hidden_size;
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, at: usize| {
            let len: usize = shape.iter().product();
            out.push(Tensor {
                name,
                data: self.params[at..at + len].to_vec(),
                shape,
            });
        };
        for l in 0..self.layers {
            let lay = self.layout(l);
            push(format!("lstm{l}.w"), vec![lay.input, h4], lay.w);
            push(format!("lstm{l}.u"), vec![self.hidden_size, h4], lay.u);
            push(format!("lstm{l}.b"), vec![h4], lay.b);
        }
        let d = self.dense_offset();
        push("dense.w".into(), vec![self.hidden_size, self.output_size], d);
        push("dense.b".into(), vec![self.output_size], d + self.hidden_size * self.output_size);
        out
    }

    fn layer_forward(&self, l: usize, input: Vec<f64>, steps: usize, batch: usize, mask: Option<Vec<f64>>) -> LayerCache {
        let lay = self.layout(l);
        let (h, d) = (self.hidden_size, lay.input);
        let h4 = 4 * h;
        let w = &self.params[lay.w..lay.u];
        let u = &self.params[lay.u..lay.b];
        let bias = &self.params[lay.b..lay.b + h4];

        let mut gates = vec![0.0; steps * batch * h4];
        for row in gates.chunks_mut(h4) {
            row.copy_from_slice(bias);
        }
        gemm(steps * batch, d, h4, &input, false, w, false, 1.0, &mut gates);

        let bh = batch * h;
        let mut cells = vec![0.0; (steps + 1) * bh];
        let mut hidden = vec![0.0; (steps + 1) * bh];
        let mut tanh_c = vec![0.0; steps * bh];
        for t in 0..steps {
            let z = &mut gates[t * batch * h4..(t + 1) * batch * h4];
            gemm(batch, h, h4, &hidden[t * bh..(t + 1) * bh], false, u, false, 1.0, z);
            for b in 0..batch {
                let zr = &mut z[b * h4..(b + 1) * h4];
                for j in 0..h {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[h + j]);
                    let g_g = zr[2 * h + j].tanh();
                    let o_g = sigmoid(zr[3 * h + j]);
                    zr[j] = i_g;
                    zr[h + j] = f_g;
                    zr[2 * h + j] = g_g;
                    zr[3 * h + j] = o_g;
                    let c_prev = cells[t * bh + b * h + j];
                    let c = f_g * c_prev + i_g * g_g;
                    let tc = c.tanh();
                    cells[(t + 1) * bh + b * h + j] = c;
                    tanh_c[t * bh + b * h + j] = tc;
                    hidden[(t + 1) * bh + b * h + j] = o_g * tc;
                }
            }
        }
        LayerCache {
            input,
            gates,
            cells,
            hidden,
            tanh_c,
            mask,
        }
    }

    /// Layer output as seen by the next layer (dropout applied).
    fn layer_output(cache: &LayerCache, bh: usize) -> Vec<f64> {
        let mut out = cache.hidden[bh..].to_vec();
        if let Some(m) = &cache.mask {
            for (o, k) in out.iter_mut().zip(m) {
                *o *= k;
            }
        }
        out
    }

    fn check_input(&self, batch: &Batch) -> Result<()> {
        let want = batch.steps * batch.size * self.input_size;
        if batch.inputs.len() != want || batch.size == 0 || batch.steps == 0 {
            return Err(Error::ShapeMismatch(format!(
                "input holds {} values, expected {} steps x {} samples x {} features",
                batch.inputs.len(),
                batch.steps,
                batch.size,
                self.input_size
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, batch: &Batch, masks: Option<&[Vec<f64>]>) -> (Vec<LayerCache>, Vec<f64>) {
        let bh = batch.size * self.hidden_size;
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers);
        let mut input = batch.inputs.clone();
        for l in 0..self.layers {
            let mask = masks.map(|m| m[l].clone());
            let cache = self.layer_forward(l, input, batch.steps, batch.size, mask);
            input = Self::layer_output(&cache, bh);
            caches.push(cache);
        }
        let last = &input[(batch.steps - 1) * bh..];
        let d = self.dense_offset();
        let (h, o) = (self.hidden_size, self.output_size);
        let mut out = vec![0.0; batch.size * o];
        for row in out.chunks_mut(o) {
            row.copy_from_slice(&self.params[d + h * o..d + h * o + o]);
        }
        gemm(batch.size, h, o, last, false, &self.params[d..d + h * o], false, 1.0, &mut out);
        (caches, out)
    }

    /// Outputs (`size x output_size`) without dropout.
    pub fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.check_input(batch)?;
        Ok(self.forward_cached(batch, None).1)
    }

    /// Forward pass with explicit dropout masks (one `T x B x H` mask per
    /// layer), or none.
    pub fn forward(&self, batch: &Batch, masks: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
        self.check_input(batch)?;
        Ok(self.forward_cached(batch, masks).1)
    }

    /// Mean squared error over every output of the batch and its gradient
    /// with respect to `params`.
    pub fn loss_and_grad(&self, batch: &Batch, masks: Option<&[Vec<f64>]>) -> Result<(f64, Vec<f64>)> {
        self.check_input(batch)?;
        if batch.targets.len() != batch.size * self.output_size {
            return Err(Error::ShapeMismatch("target block does not match batch".into()));
        }
        let (caches, out) = self.forward_cached(batch, masks);
        let (h, o, bsz, steps) = (self.hidden_size, self.output_size, batch.size, batch.steps);
        let h4 = 4 * h;
        let bh = bsz * h;
        let count = (bsz * o) as f64;
        let mut loss = 0.0;
        let mut d_out = vec![0.0; bsz * o];
        for ((g, y), t) in d_out.iter_mut().zip(&out).zip(&batch.targets) {
            let e = y - t;
            loss += e * e;
            *g = 2.0 * e / count;
        }
        loss /= count;

        let mut grad = vec![0.0; self.params.len()];
        let d = self.dense_offset();
        let top = caches.last().expect("at least one layer");
        let last = Self::layer_output(top, bh);
        let last = &last[(steps - 1) * bh..];
        gemm(h, bsz, o, last, true, &d_out, false, 0.0, &mut grad[d..d + h * o]);
        for row in d_out.chunks(o) {
            for (g, v) in grad[d + h * o..d + h * o + o].iter_mut().zip(row) {
                *g += v;
            }
        }
        // gradient w.r.t. every output of the current layer, T x B x H
        let mut d_seq = vec![0.0; steps * bh];
        gemm(bsz, o, h, &d_out, false, &self.params[d..d + h * o], true, 0.0, &mut d_seq[(steps - 1) * bh..]);

        for l in (0..self.layers).rev() {
            let cache = &caches[l];
            let lay = self.layout(l);
            if let Some(m) = &cache.mask {
                for (g, k) in d_seq.iter_mut().zip(m) {
                    *g *= k;
                }
            }
            let u = &self.params[lay.u..lay.b];
            let mut dz = vec![0.0; steps * bsz * h4];
            let mut dh_next = vec![0.0; bh];
            let mut dc_next = vec![0.0; bh];
            for t in (0..steps).rev() {
                let gates = &cache.gates[t * bsz * h4..(t + 1) * bsz * h4];
                let dzt = &mut dz[t * bsz * h4..(t + 1) * bsz * h4];
                for b in 0..bsz {
                    for j in 0..h {
                        let k = b * h + j;
                        let g = &gates[b * h4..(b + 1) * h4];
                        let (i_g, f_g, g_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                        let tc = cache.tanh_c[t * bh + k];
                        let dh = d_seq[t * bh + k] + dh_next[k];
                        let dc = dc_next[k] + dh * o_g * (1.0 - tc * tc);
                        let c_prev = cache.cells[t * bh + k];
                        let z = &mut dzt[b * h4..(b + 1) * h4];
                        z[j] = dc * g_g * i_g * (1.0 - i_g);
                        z[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                        z[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
                        z[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
                        dc_next[k] = dc * f_g;
                    }
                }
                // U gradient from h_{t-1}, and the recurrent error signal
                gemm(h, bsz, h4, &cache.hidden[t * bh..(t + 1) * bh], true, dzt, false, 1.0, &mut grad[lay.u..lay.b]);
                gemm(bsz, h4, h, dzt, false, u, true, 0.0, &mut dh_next);
            }
            for row in dz.chunks(h4) {
                for (g, v) in grad[lay.b..lay.b + h4].iter_mut().zip(row) {
                    *g += v;
                }
            }
            gemm(lay.input, steps * bsz, h4, &cache.input, true, &dz, false, 0.0, &mut grad[lay.w..lay.u]);
            if l > 0 {
                d_seq = vec![0.0; steps * bsz * lay.input];
                gemm(steps * bsz, h4, lay.input, &dz, false, &self.params[lay.w..lay.u], true, 0.0, &mut d_seq);
            }
        }
        Ok((loss, grad))
    }

    /// Per-layer gate activations for one sample, for inspection.
    pub fn gate_activations(&self, batch: &Batch) -> Result<Vec<Vec<f64>>> {
        self.check_input(batch)?;
        Ok(self.forward_cached(batch, None).0.into_iter().map(|c| c.gates).collect())
    }

    fn random_masks(&self, rng: &mut CounterRng, steps: usize, batch: usize, rate: f64) -> Option<Vec<Vec<f64>>> {
        (rate > 0.0).then(|| {
            (0..self.layers)
                .map(|_| dropout_mask(rng, steps * batch * self.hidden_size, rate))
                .collect()
        })
    }
}

/// Supervised windows: each input is `lookback x width` (row-major, one row
/// per week), each target the following `output_size` prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub width: usize,
    pub lookback: usize,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Packs the selected samples into a time-major batch.
    pub fn batch(&self, idx: &[usize]) -> Batch {
        let (t_len, w) = (self.lookback, self.width);
        let mut inputs = vec![0.0; t_len * idx.len() * w];
        for (b, &s) in idx.iter().enumerate() {
            for t in 0..t_len {
                let dst = (t * idx.len() + b) * w;
                inputs[dst..dst + w].copy_from_slice(&self.inputs[s][t * w..(t + 1) * w]);
            }
        }
        Batch {
            inputs,
            targets: idx.iter().flat_map(|&s| self.targets[s].iter().copied()).collect(),
            size: idx.len(),
            steps: t_len,
        }
    }
}

fn scaled_matrix(frame: &FeatureFrame) -> Result<(Vec<f64>, usize)> {
    let names = frame.column_names();
    let cols = names
        .iter()
        .map(|n| frame.observed(n))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(frame.len() * cols.len());
    for t in 0..frame.len() {
        out.extend(cols.iter().map(|c| c[t]));
    }
    Ok((out, cols.len()))
}

/// Sample `i` covers input weeks `[i, i + lookback)` and target prices for
/// weeks `[i + lookback, i + lookback + output_size)`.
pub fn make_windows(frame: &FeatureFrame, lookback: usize, output_size: usize, multivariate: bool) -> Result<Windows> {
    let frame = select_columns(frame, multivariate)?;
    if frame.len() < lookback + output_size {
        return Err(Error::TooShort {
            needed: lookback + output_size,
            got: frame.len(),
        });
    }
    let (rows, width) = scaled_matrix(&frame)?;
    let count = frame.len() - lookback - output_size + 1;
    let inputs = (0..count)
        .map(|i| rows[i * width..(i + lookback) * width].to_vec())
        .collect();
    let targets = (0..count)
        .map(|i| {
            (i + lookback..i + lookback + output_size)
                .map(|t| rows[t * width])
                .collect()
        })
        .collect();
    Ok(Windows {
        inputs,
        targets,
        width,
        lookback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    pub validation: Option<f64>,
}

fn adam_step(params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: usize, p: &LstmParams) {
    let c1 = 1.0 - p.beta1.powi(step as i32);
    let c2 = 1.0 - p.beta2.powi(step as i32);
    for i in 0..params.len() {
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * grad[i];
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= p.learning_rate * m_hat / (v_hat.sqrt() + p.adam_eps);
    }
}

fn batch_loss(net: &LstmNetwork, windows: &Windows, idx: &[usize], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch = windows.batch(chunk);
        let out = net.predict(&batch)?;
        total += out
            .iter()
            .zip(&batch.targets)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / (idx.len() * net.output_size) as f64)
}

/// Trains a fresh network on `windows`. The final
/// `validation_fraction` of samples drives early stopping and the weights
/// of the best validation epoch are kept.
pub fn train_windows(windows: &Windows, params: &LstmParams) -> Result<(LstmNetwork, Vec<EpochLoss>)> {
    params.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyData);
    }
    let output = windows.targets[0].len();
    let mut net = LstmNetwork::init(windows.width, params.hidden_size, params.layers, output, params.seed);
    let n_val = (windows.len() as f64 * params.validation_fraction).floor() as usize;
    let n_val = if windows.len() - n_val == 0 { 0 } else { n_val };
    let n_train = windows.len() - n_val;
    let val_idx: Vec<usize> = (n_train..windows.len()).collect();

    let mut m = vec![0.0; net.params.len()];
    let mut v = vec![0.0; net.params.len()];
    let mut step = 0;
    let mut history = Vec::with_capacity(params.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0;

    for epoch in 0..params.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        CounterRng::with_stream(params.seed, 2 * epoch as u64).shuffle(&mut order);
        let mut mask_rng = CounterRng::with_stream(params.seed, 2 * epoch as u64 + 1);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(params.batch_size).enumerate() {
            let batch = windows.batch(chunk);
            let masks = net.random_masks(&mut mask_rng, batch.steps, batch.size, params.dropout_rate);
            let (loss, mut grad) = net.loss_and_grad(&batch, masks.as_deref())?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > params.clip_norm {
                let k = params.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            step += 1;
            adam_step(&mut net.params, &grad, &mut m, &mut v, step, params);
            sum += loss * chunk.len() as f64;
        }
        let train = sum / n_train as f64;
        let validation = if n_val > 0 {
            Some(batch_loss(&net, windows, &val_idx, 64)?)
        } else {
            None
        };
        history.push(EpochLoss { train, validation });
        log::debug!("lstm epoch {epoch}: train {train:.6} validation {validation:?}");
        if let Some(val) = validation {
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, net.params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, p)) = best {
        net.params = p;
    }
    Ok((net, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub network: LstmNetwork,
    pub scaler: MinMaxScaler,
    pub params: LstmParams,
    pub multivariate: bool,
    pub history: Vec<EpochLoss>,
}

impl LstmModel {
    pub fn train(frame: &FeatureFrame, params: &LstmParams, multivariate: bool) -> Result<Self> {
        params.validate()?;
        let frame = select_columns(frame, multivariate)?;
        let scaler = MinMaxScaler::fit_allow_constant(&frame)?;
        let scaled = scaler.transform(&frame)?;
        let windows = make_windows(&scaled, params.lookback_window, params.output_size, multivariate)?;
        let (network, history) = train_windows(&windows, params)?;
        Ok(Self {
            network,
            scaler,
            params: *params,
            multivariate,
            history,
        })
    }

    fn last_window(&self, frame: &FeatureFrame) -> Result<(Vec<f64>, usize)> {
        let frame = select_columns(frame, self.multivariate)?;
        let lookback = self.params.lookback_window;
        if frame.len() < lookback {
            return Err(Error::TooShort {
                needed: lookback,
                got: frame.len(),
            });
        }
        let tail = frame.slice(frame.len() - lookback..frame.len())?;
        scaled_matrix(&self.scaler.transform(&tail)?)
    }

    fn run(&self, window: &[f64]) -> Result<Vec<f64>> {
        let batch = Batch {
            inputs: window.to_vec(),
            targets: Vec::new(),
            size: 1,
            steps: self.params.lookback_window,
        };
        Ok(self
            .network
            .predict(&batch)?
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect())
    }

    /// Direct forecast of up to `output_size` weeks from the final lookback
    /// window of `frame`, in price units.
    pub fn forecast(&self, frame: &FeatureFrame, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        if horizon > self.params.output_size {
            return Err(Error::HorizonTooLarge {
                horizon,
                max: self.params.output_size,
            });
        }
        let (window, _) = self.last_window(frame)?;
        self.run(&window)?[..horizon]
            .iter()
            .map(|v| self.scaler.unscale(PRICE, *v))
            .collect()
    }

    /// Forecast of any length: whole output blocks are chained, each block
    /// fed back as price history while drivers stay at their last values.
    pub fn forecast_extended(&self, frame: &FeatureFrame, horizon: usize) -> Result<Vec<f64>> {
        if horizon <= self.params.output_size {
            return self.forecast(frame, horizon);
        }
        let (mut window, width) = self.last_window(frame)?;
        let last_row = window[window.len() - width..].to_vec();
        let mut scaled = Vec::with_capacity(horizon);
        while scaled.len() < horizon {
            let block = self.run(&window)?;
            for v in block.into_iter().take(horizon - scaled.len()) {
                scaled.push(v);
                window.drain(..width);
                window.push(v);
                window.extend_from_slice(&last_row[1..]);
            }
        }
        scaled
            .into_iter()
            .map(|v| self.scaler.unscale(PRICE, v))
            .collect()
    }
}
