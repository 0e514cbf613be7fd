//! A small feed-forward network: 3x3 convolutions, pooling, upsampling,
//! dense layers and pointwise nonlinearities over a flat parameter vector.
//!
//! Arithmetic is in `f64` so finite-difference gradient checks are
//! meaningful; weights are stored as `f32` on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Self { c: n, h: 1, w: 1 }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3x3 kernel, stride 1, zero padding 1.
    Conv3x3 { filters: usize },
    Relu,
    Tanh,
    Sigmoid,
    /// 2x2 average pooling, stride 2.
    AvgPool2,
    /// 2x nearest-neighbour upsampling.
    Upsample2,
    /// Fully connected; flattens its input.
    Dense { units: usize },
    Reshape { c: usize, h: usize, w: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    offset: usize,
    n_params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Shape,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    pub params: Vec<f64>,
}

impl Network {
    /// Builds the network and initializes weights (He-uniform for
    /// convolutions, Glorot-uniform for dense layers, zero biases).
    pub fn new(input: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input, specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &net.layers {
            let (n_w, limit) = match layer.spec {
                LayerSpec::Conv3x3 { filters } => {
                    let fan_in = layer.input.c * 9;
                    (filters * fan_in, (6.0 / fan_in as f64).sqrt())
                }
                LayerSpec::Dense { units } => {
                    let fan_in = layer.input.len();
                    (units * fan_in, (6.0 / (fan_in + units) as f64).sqrt())
                }
                _ => continue,
            };
            for p in &mut net.params[layer.offset..layer.offset + n_w] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// Same architecture with every parameter zero.
    pub fn zeros(input: Shape, specs: &[LayerSpec]) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::invalid("empty input shape"));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input;
        let mut offset = 0;
        for (k, &spec) in specs.iter().enumerate() {
            let (output, n_params) = match spec {
                LayerSpec::Conv3x3 { filters } => {
                    if filters == 0 {
                        return Err(Error::invalid(format!("layer {k}: zero filters")));
                    }
                    (
                        Shape::new(filters, shape.h, shape.w),
                        filters * shape.c * 9 + filters,
                    )
                }
                LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid => (shape, 0),
                LayerSpec::AvgPool2 => {
                    if shape.h % 2 != 0 || shape.w % 2 != 0 {
                        return Err(Error::invalid(format!(
                            "layer {k}: pooling needs even spatial size, got {}x{}",
                            shape.h, shape.w
                        )));
                    }
                    (Shape::new(shape.c, shape.h / 2, shape.w / 2), 0)
                }
                LayerSpec::Upsample2 => (Shape::new(shape.c, shape.h * 2, shape.w * 2), 0),
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(Error::invalid(format!("layer {k}: zero units")));
                    }
                    (Shape::flat(units), units * shape.len() + units)
                }
                LayerSpec::Reshape { c, h, w } => {
                    let s = Shape::new(c, h, w);
                    if s.len() != shape.len() {
                        return Err(Error::invalid(format!(
                            "layer {k}: cannot reshape {} values into {c}x{h}x{w}",
                            shape.len()
                        )));
                    }
                    (s, 0)
                }
            };
            layers.push(Layer {
                spec,
                input: shape,
                output,
                offset,
                n_params,
            });
            offset += n_params;
            shape = output;
        }
        Ok(Self {
            input,
            specs: specs.to_vec(),
            layers,
            params: vec![0.0; offset],
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter index range owned by layer `k` (empty for parameter-free
    /// layers).
    pub fn layer_param_range(&self, k: usize) -> std::ops::Range<usize> {
        let l = &self.layers[k];
        l.offset..l.offset + l.n_params
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_all(x)?.pop().unwrap_or_default())
    }

    /// Activations of every layer; element 0 is the input.
    pub fn forward_all(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input.len() {
            return Err(Error::invalid(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let out = layer_forward(layer, &self.params, acts.last().unwrap());
            acts.push(out);
        }
        Ok(acts)
    }

    /// Accumulates dLoss/dparams into `grad` given the activations from
    /// `forward_all` and dLoss/doutput. `flip_layer` negates the gradient of
    /// one layer's parameters; it exists only to exercise the gradient check.
    pub fn backward(&self, acts: &[Vec<f64>], d_out: Vec<f64>, grad: &mut [f64], flip_layer: Option<usize>) {
        let mut d = d_out;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let g = &mut grad[layer.offset..layer.offset + layer.n_params];
            let sign = if flip_layer == Some(k) { -1.0 } else { 1.0 };
            d = layer_backward(layer, &self.params, &acts[k], &acts[k + 1], &d, g, sign, k > 0);
        }
    }
}

fn conv_forward(x: &[f64], s: Shape, filters: usize, params: &[f64]) -> Vec<f64> {
    let plane = s.h * s.w;
    let (weights, bias) = params.split_at(filters * s.c * 9);
    let mut out = vec![0.0; filters * plane];
    for oc in 0..filters {
        let o = &mut out[oc * plane..(oc + 1) * plane];
        o.fill(bias[oc]);
        for ic in 0..s.c {
            let xi = &x[ic * plane..(ic + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = weights[(oc * s.c + ic) * 9 + ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (ylo, yhi) = (1usize.saturating_sub(ky), (s.h + 1 - ky).min(s.h));
                    let (xlo, xhi) = (1usize.saturating_sub(kx), (s.w + 1 - kx).min(s.w));
                    for y in ylo..yhi {
                        let src = (y + ky - 1) * s.w + xlo + kx - 1;
                        let orow = &mut o[y * s.w + xlo..y * s.w + xhi];
                        let irow = &xi[src..src + xhi - xlo];
                        for (a, b) in orow.iter_mut().zip(irow) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    s: Shape,
    filters: usize,
    params: &[f64],
    d_out: &[f64],
    grad: &mut [f64],
    sign: f64,
    need_input_grad: bool,
) -> Vec<f64> {
    let plane = s.h * s.w;
    let n_w = filters * s.c * 9;
    let weights = &params[..n_w];
    let mut d_in = vec![0.0; if need_input_grad { s.len() } else { 0 }];
    for oc in 0..filters {
        let go = &d_out[oc * plane..(oc + 1) * plane];
        grad[n_w + oc] += sign * go.iter().sum::<f64>();
        for ic in 0..s.c {
            let xi = &x[ic * plane..(ic + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = (oc * s.c + ic) * 9 + ky * 3 + kx;
                    let wv = weights[widx];
                    let (ylo, yhi) = (1usize.saturating_sub(ky), (s.h + 1 - ky).min(s.h));
                    let (xlo, xhi) = (1usize.saturating_sub(kx), (s.w + 1 - kx).min(s.w));
                    let mut acc = 0.0;
                    for y in ylo..yhi {
                        let src = (y + ky - 1) * s.w + xlo + kx - 1;
                        let grow = &go[y * s.w + xlo..y * s.w + xhi];
                        let irow = &xi[src..src + xhi - xlo];
                        acc += grow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                        if need_input_grad && wv != 0.0 {
                            let drow = &mut d_in[ic * plane + src..ic * plane + src + xhi - xlo];
                            for (dv, g) in drow.iter_mut().zip(grow) {
                                *dv += wv * g;
                            }
                        }
                    }
                    grad[widx] += sign * acc;
                }
            }
        }
    }
    d_in
}

fn layer_forward(layer: &Layer, all_params: &[f64], x: &[f64]) -> Vec<f64> {
    let params = &all_params[layer.offset..layer.offset + layer.n_params];
    let s = layer.input;
    match layer.spec {
        LayerSpec::Conv3x3 { filters } => conv_forward(x, s, filters, params),
        LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::Tanh => x.iter().map(|v| v.tanh()).collect(),
        LayerSpec::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
        LayerSpec::AvgPool2 => {
            let o = layer.output;
            let mut out = vec![0.0; o.len()];
            for c in 0..o.c {
                for y in 0..o.h {
                    for xx in 0..o.w {
                        let base = c * s.h * s.w + 2 * y * s.w + 2 * xx;
                        out[(c * o.h + y) * o.w + xx] =
                            0.25 * (x[base] + x[base + 1] + x[base + s.w] + x[base + s.w + 1]);
                    }
                }
            }
            out
        }
        LayerSpec::Upsample2 => {
            let o = layer.output;
            let mut out = vec![0.0; o.len()];
            for c in 0..o.c {
                for y in 0..o.h {
                    for xx in 0..o.w {
                        out[(c * o.h + y) * o.w + xx] = x[(c * s.h + y / 2) * s.w + xx / 2];
                    }
                }
            }
            out
        }
        LayerSpec::Dense { units } => {
            let n_in = s.len();
            let (w, b) = params.split_at(units * n_in);
            (0..units)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        }
        LayerSpec::Reshape { .. } => x.to_vec(),
    }
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    layer: &Layer,
    all_params: &[f64],
    x: &[f64],
    y: &[f64],
    d_out: &[f64],
    grad: &mut [f64],
    sign: f64,
    need_input_grad: bool,
) -> Vec<f64> {
    let params = &all_params[layer.offset..layer.offset + layer.n_params];
    let s = layer.input;
    match layer.spec {
        LayerSpec::Conv3x3 { filters } => {
            conv_backward(x, s, filters, params, d_out, grad, sign, need_input_grad)
        }
        LayerSpec::Relu => x
            .iter()
            .zip(d_out)
            .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
            .collect(),
        LayerSpec::Tanh => y.iter().zip(d_out).map(|(&t, &g)| g * (1.0 - t * t)).collect(),
        LayerSpec::Sigmoid => y.iter().zip(d_out).map(|(&t, &g)| g * t * (1.0 - t)).collect(),
        LayerSpec::AvgPool2 => {
            let o = layer.output;
            let mut d = vec![0.0; s.len()];
            for c in 0..o.c {
                for yy in 0..o.h {
                    for xx in 0..o.w {
                        let g = 0.25 * d_out[(c * o.h + yy) * o.w + xx];
                        let base = c * s.h * s.w + 2 * yy * s.w + 2 * xx;
                        d[base] += g;
                        d[base + 1] += g;
                        d[base + s.w] += g;
                        d[base + s.w + 1] += g;
                    }
                }
            }
            d
        }
        LayerSpec::Upsample2 => {
            let o = layer.output;
            let mut d = vec![0.0; s.len()];
            for c in 0..o.c {
                for yy in 0..o.h {
                    for xx in 0..o.w {
                        d[(c * s.h + yy / 2) * s.w + xx / 2] += d_out[(c * o.h + yy) * o.w + xx];
                    }
                }
            }
            d
        }
        LayerSpec::Dense { units } => {
            let n_in = s.len();
            let (w, _) = params.split_at(units * n_in);
            let mut d = vec![0.0; if need_input_grad { n_in } else { 0 }];
            for o in 0..units {
                let g = d_out[o];
                if g == 0.0 {
                    continue;
                }
                grad[units * n_in + o] += sign * g;
                let gw = &mut grad[o * n_in..(o + 1) * n_in];
                for (gv, xv) in gw.iter_mut().zip(x) {
                    *gv += sign * g * xv;
                }
                if need_input_grad {
                    for (dv, wv) in d.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *dv += g * wv;
                    }
                }
            }
            d
        }
        LayerSpec::Reshape { .. } => d_out.to_vec(),
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // all -inf, or a +inf/NaN entry: fall back to uniform over the maxima
        let hits: Vec<bool> = logits.iter().map(|&v| v == m || m.is_nan()).collect();
        let n = hits.iter().filter(|&&h| h).count().max(1) as f64;
        return hits.iter().map(|&h| if h { 1.0 / n } else { 0.0 }).collect();
    }
    let e: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    /// Softmax cross-entropy against a class index; the network output is
    /// the logit vector.
    CrossEntropy(usize),
    /// Mean squared error against a target of the output's length.
    Mse(Vec<f64>),
}

impl Loss {
    /// Loss value and its gradient with respect to the network output.
    pub fn eval(&self, out: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Loss::CrossEntropy(label) => {
                let mut p = softmax(out);
                let loss = -(p[*label].max(1e-300)).ln();
                p[*label] -= 1.0;
                (loss, p)
            }
            Loss::Mse(target) => {
                let n = out.len() as f64;
                let loss = out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / n;
                let d = out.iter().zip(target).map(|(o, t)| 2.0 * (o - t) / n).collect();
                (loss, d)
            }
        }
    }
}

impl Network {
    pub fn loss(&self, x: &[f64], loss: &Loss) -> Result<f64> {
        Ok(loss.eval(&self.forward(x)?).0)
    }

    /// Loss and gradient accumulation for one example.
    pub fn accumulate(&self, x: &[f64], loss: &Loss, grad: &mut [f64], flip_layer: Option<usize>) -> Result<f64> {
        let acts = self.forward_all(x)?;
        let (l, d) = loss.eval(acts.last().unwrap());
        self.backward(&acts, d, grad, flip_layer);
        Ok(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, n: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Sgd { momentum } => {
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = momentum * *m - lr * g;
                    *p += *m;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub n_params: usize,
    pub step: f64,
    pub seed: u64,
    pub flip_layer: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            n_params: 200,
            step: 1e-4,
            seed: 0,
            flip_layer: None,
        }
    }
}

/// Largest relative disagreement between backpropagated and central
/// finite-difference gradients over a random parameter subset.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`, and 0 where both are
/// exactly zero.
pub fn gradient_check(net: &Network, x: &[f64], loss: &Loss, cfg: &GradCheckConfig) -> Result<f64> {
    let mut grad = vec![0.0; net.n_params()];
    net.accumulate(x, loss, &mut grad, cfg.flip_layer)?;

    let mut idx: Vec<usize> = (0..net.n_params()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let take = cfg.n_params.min(idx.len());
    for k in 0..take {
        let j = rng.random_range(k..idx.len());
        idx.swap(k, j);
    }

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &i in &idx[..take] {
        let p0 = probe.params[i];
        probe.params[i] = p0 + cfg.step;
        let up = probe.loss(x, loss)?;
        probe.params[i] = p0 - cfg.step;
        let down = probe.loss(x, loss)?;
        probe.params[i] = p0;
        let numeric = (up - down) / (2.0 * cfg.step);
        let a = grad[i];
        if a == 0.0 && numeric == 0.0 {
            continue;
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
