//! Parameter storage, initialization and the forward/backward passes over
//! a resolved [`ArchConfig`].

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{ArchConfig, InputKind, LayerPlan, LayerSpec};
use super::layers::{self, BnTrace, LstmTrace};
use super::Tensor;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub tensor: Tensor<T>,
}

/// Adam first/second moments, aligned with `Checkpoint::params`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

/// Serializable position of a ChaCha8 stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Parse(format!("invalid rng state {self:?}"));
        if self.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse::<u128>().map_err(|_| bad())?);
        Ok(rng)
    }
}

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub arch: ArchConfig,
    pub params: Vec<NamedTensor<T>>,
    /// Batch norm running mean/variance.
    pub buffers: Vec<NamedTensor<T>>,
    pub optimizer: AdamState<T>,
    pub rng: RngState,
    /// Class names by id; empty when unknown.
    pub labels: Vec<String>,
}

/// Resolved layer stack with parameter index ranges.
#[derive(Debug, Clone)]
pub struct Network {
    pub arch: ArchConfig,
    pub layers: Vec<LayerPlan>,
    param_ranges: Vec<Range<usize>>,
    buffer_ranges: Vec<Range<usize>>,
}

impl Network {
    pub fn new(arch: &ArchConfig) -> Result<Self> {
        arch.validate()?;
        let layers = arch.plan()?;
        let (mut p, mut b) = (0, 0);
        let mut param_ranges = Vec::with_capacity(layers.len());
        let mut buffer_ranges = Vec::with_capacity(layers.len());
        for l in &layers {
            let np = l.spec.parameter_shapes(&l.input_shape).len();
            let nb = l.spec.buffer_shapes(&l.input_shape).len();
            param_ranges.push(p..p + np);
            buffer_ranges.push(b..b + nb);
            p += np;
            b += nb;
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
            param_ranges,
            buffer_ranges,
        })
    }

    pub fn param_range(&self, layer: usize) -> Range<usize> {
        self.param_ranges[layer].clone()
    }

    /// Batched input shape for `batch` samples.
    pub fn batch_shape(&self, batch: usize) -> Vec<usize> {
        let mut s = vec![batch];
        s.extend(self.arch.input_shape());
        s
    }

    /// Expected parameter names and shapes in storage order.
    pub fn parameter_layout(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.spec
                    .parameter_shapes(&l.input_shape)
                    .into_iter()
                    .map(move |(n, s)| (format!("{}.{n}", l.name()), s))
            })
            .collect()
    }

    pub fn buffer_layout(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.spec
                    .buffer_shapes(&l.input_shape)
                    .into_iter()
                    .map(move |(n, s)| (format!("{}.{n}", l.name()), s))
            })
            .collect()
    }
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// He-uniform for convolution and dense weights, Glorot-uniform for LSTM
/// weights with forget-gate bias 1, batch norm at identity. Deterministic
/// per seed.
pub fn init_parameters<T: Scalar>(arch: &ArchConfig, seed: u64) -> Result<Checkpoint<T>> {
    let net = Network::new(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    let mut buffers = Vec::new();
    for l in &net.layers {
        let shapes = l.spec.parameter_shapes(&l.input_shape);
        let tensors: Vec<Tensor<T>> = match l.spec {
            LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. } => {
                let w = &shapes[0].1;
                let fan_in: usize = w[..w.len() - 1].iter().product();
                vec![
                    uniform(&mut rng, w, (6.0 / fan_in as f64).sqrt()),
                    Tensor::zeros(&shapes[1].1),
                ]
            }
            LayerSpec::BatchNorm { .. } => vec![
                Tensor::full(&shapes[0].1, T::one()),
                Tensor::zeros(&shapes[1].1),
            ],
            LayerSpec::Lstm { units, .. } => {
                let glorot = |s: &[usize]| (6.0 / (s[0] + s[1]) as f64).sqrt();
                let wx = uniform(&mut rng, &shapes[0].1, glorot(&shapes[0].1));
                let wh = uniform(&mut rng, &shapes[1].1, glorot(&shapes[1].1));
                let mut b = Tensor::zeros(&shapes[2].1);
                b.data_mut()[units..2 * units].iter_mut().for_each(|v| *v = T::one());
                vec![wx, wh, b]
            }
            _ => vec![],
        };
        for ((name, _), tensor) in shapes.iter().zip(tensors) {
            params.push(NamedTensor {
                name: format!("{}.{name}", l.name()),
                tensor,
            });
        }
        for (name, shape) in l.spec.buffer_shapes(&l.input_shape) {
            let tensor = if name == "running_var" {
                Tensor::full(&shape, T::one())
            } else {
                Tensor::zeros(&shape)
            };
            buffers.push(NamedTensor {
                name: format!("{}.{name}", l.name()),
                tensor,
            });
        }
    }
    let zeros: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.tensor.shape())).collect();
    Ok(Checkpoint {
        arch: arch.clone(),
        params,
        buffers,
        optimizer: AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        },
        rng: RngState::capture(&ChaCha8Rng::seed_from_u64(seed).tap_stream(1)),
        labels: Vec::new(),
    })
}

trait TapStream {
    fn tap_stream(self, stream: u64) -> Self;
}

impl TapStream for ChaCha8Rng {
    fn tap_stream(mut self, stream: u64) -> Self {
        self.set_stream(stream);
        self
    }
}

pub(crate) enum Cache<T> {
    Conv { input: Tensor<T> },
    Relu { output: Tensor<T> },
    BatchNorm { trace: BnTrace<T> },
    Dropout { mask: Option<Vec<T>> },
    Dense { input: Tensor<T> },
    Lstm { input: Tensor<T>, trace: LstmTrace<T> },
    Flatten { shape: Vec<usize> },
    Softmax { probs: Tensor<T> },
}

/// Output probabilities plus the activations needed by [`backward`].
pub struct ForwardPass<T> {
    pub probs: Tensor<T>,
    pub(crate) caches: Vec<Cache<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Sign pattern of every ReLU output; used to detect kinks in checks.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.caches
            .iter()
            .filter_map(|c| match c {
                Cache::Relu { output } => Some(output.data().iter().map(|&v| v > T::zero())),
                _ => None,
            })
            .flatten()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Accepts `[B, ...input_shape]`; raw audio may also come as `[B, 1, L]`.
fn conform_input<T: Scalar>(net: &Network, x: &Tensor<T>) -> Result<Tensor<T>> {
    let expected = net.arch.input_shape();
    let shape = x.shape();
    if shape.len() == expected.len() + 1 && shape[1..] == expected[..] && shape[0] > 0 {
        return Ok(x.clone());
    }
    if net.arch.input == InputKind::Raw6s && shape.len() == 3 && shape[1] == 1 && shape[2] == expected[0] {
        return x.clone().reshaped(&[shape[0], expected[0], 1]);
    }
    Err(Error::shape(
        "input",
        format!("expected [batch, {expected:?}], got {shape:?}"),
    ))
}

/// Runs the network. In training mode dropout draws from `rng` and batch
/// norm uses batch statistics and updates the running buffers.
pub fn forward<T: Scalar>(
    net: &Network,
    params: &[NamedTensor<T>],
    buffers: &mut [NamedTensor<T>],
    input: &Tensor<T>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardPass<T>> {
    let training = mode == Mode::Train;
    let mut x = conform_input(net, input)?;
    let mut caches = Vec::with_capacity(net.layers.len());
    for (li, layer) in net.layers.iter().enumerate() {
        let p = &params[net.param_ranges[li].clone()];
        if x.shape()[1..] != layer.input_shape[..] {
            return Err(Error::shape(
                layer.name(),
                format!("expected {:?}, got {:?}", layer.input_shape, &x.shape()[1..]),
            ));
        }
        let (y, cache) = match layer.spec {
            LayerSpec::Conv1d { stride, .. } => {
                let y = layers::conv_forward(&x, &p[0].tensor, &p[1].tensor, stride);
                (y, Cache::Conv { input: x })
            }
            LayerSpec::Relu => {
                let y = layers::relu_forward(&x);
                (y.clone(), Cache::Relu { output: y })
            }
            LayerSpec::BatchNorm { momentum, eps } => {
                let br = net.buffer_ranges[li].clone();
                let (y, trace) = if training {
                    let (mean, var) = layers::channel_moments(&x);
                    let n = (x.len() / x.last_dim()) as f64;
                    let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
                    let (rm, rv) = buffers[br].split_at_mut(1);
                    let (m, keep) = (T::of(1.0 - momentum), T::of(momentum));
                    for (r, &v) in rm[0].tensor.data_mut().iter_mut().zip(&mean) {
                        *r = keep * *r + m * T::of(v);
                    }
                    for (r, &v) in rv[0].tensor.data_mut().iter_mut().zip(&var) {
                        *r = keep * *r + m * T::of(v * unbias);
                    }
                    layers::bn_normalize(&x, &mean, &var, eps, &p[0].tensor, &p[1].tensor, true)
                } else {
                    let b = &buffers[br];
                    let mean: Vec<f64> = b[0].tensor.data().iter().map(|v| v.to_f64_lossy()).collect();
                    let var: Vec<f64> = b[1].tensor.data().iter().map(|v| v.to_f64_lossy()).collect();
                    layers::bn_normalize(&x, &mean, &var, eps, &p[0].tensor, &p[1].tensor, false)
                };
                (y, Cache::BatchNorm { trace })
            }
            LayerSpec::Dropout { rate } => {
                if training && rate > 0.0 {
                    let (y, mask) = layers::dropout_forward(&x, rate, rng);
                    (y, Cache::Dropout { mask: Some(mask) })
                } else {
                    (x, Cache::Dropout { mask: None })
                }
            }
            LayerSpec::Dense { .. } => {
                let y = layers::dense_forward(&x, &p[0].tensor, &p[1].tensor);
                (y, Cache::Dense { input: x })
            }
            LayerSpec::Lstm { return_sequences, .. } => {
                let (y, trace) =
                    layers::lstm_forward(&x, &p[0].tensor, &p[1].tensor, &p[2].tensor, return_sequences);
                (y, Cache::Lstm { input: x, trace })
            }
            LayerSpec::Flatten => {
                let shape = x.shape().to_vec();
                let b = shape[0];
                let n = x.len() / b;
                (x.reshaped(&[b, n])?, Cache::Flatten { shape })
            }
            LayerSpec::Softmax => {
                let y = layers::softmax_forward(&x);
                (y.clone(), Cache::Softmax { probs: y })
            }
        };
        caches.push(cache);
        x = y;
    }
    Ok(ForwardPass { probs: x, caches })
}

/// Gradients for every parameter plus the input gradient.
pub struct Gradients<T> {
    pub params: Vec<Tensor<T>>,
    pub input: Option<Tensor<T>>,
}

/// Where the upstream gradient enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientEntry {
    /// Gradient with respect to the softmax output.
    Probabilities,
    /// Gradient with respect to the softmax input (fused softmax + cross-entropy).
    Logits,
}

/// Backpropagates `grad` through the cached pass.
pub fn backward<T: Scalar>(
    net: &Network,
    params: &[NamedTensor<T>],
    pass: &ForwardPass<T>,
    grad: &Tensor<T>,
    entry: GradientEntry,
    need_input_grad: bool,
) -> Result<Gradients<T>> {
    let mut grads: Vec<Option<Tensor<T>>> = vec![None; params.len()];
    let mut dy = grad.clone();
    let n = net.layers.len();
    let start = match entry {
        GradientEntry::Probabilities => n,
        GradientEntry::Logits => n - 1,
    };
    for li in (0..start).rev() {
        let layer = &net.layers[li];
        let range = net.param_ranges[li].clone();
        let p = &params[range.clone()];
        let need_dx = li > 0 || need_input_grad;
        let dx = match (&layer.spec, &pass.caches[li]) {
            (LayerSpec::Conv1d { stride, .. }, Cache::Conv { input }) => {
                let g = layers::conv_backward(input, &p[0].tensor, *stride, &dy, need_dx);
                for (slot, t) in range.zip(g.grads) {
                    grads[slot] = Some(t);
                }
                g.dx
            }
            (LayerSpec::Relu, Cache::Relu { output }) => Some(layers::relu_backward(output, &dy)),
            (LayerSpec::BatchNorm { .. }, Cache::BatchNorm { trace }) => {
                let (dx, g) = layers::bn_backward(trace, &p[0].tensor, &dy);
                for (slot, t) in range.zip(g) {
                    grads[slot] = Some(t);
                }
                Some(dx)
            }
            (LayerSpec::Dropout { .. }, Cache::Dropout { mask }) => Some(match mask {
                Some(m) => layers::apply_mask(&dy, m),
                None => dy.clone(),
            }),
            (LayerSpec::Dense { .. }, Cache::Dense { input }) => {
                let g = layers::dense_backward(input, &p[0].tensor, &dy, need_dx);
                for (slot, t) in range.zip(g.grads) {
                    grads[slot] = Some(t);
                }
                g.dx
            }
            (LayerSpec::Lstm { return_sequences, .. }, Cache::Lstm { input, trace }) => {
                let g = layers::lstm_backward(
                    trace,
                    input,
                    &p[0].tensor,
                    &p[1].tensor,
                    &dy,
                    *return_sequences,
                    need_dx,
                );
                for (slot, t) in range.zip(g.grads) {
                    grads[slot] = Some(t);
                }
                g.dx
            }
            (LayerSpec::Flatten, Cache::Flatten { shape }) => Some(dy.clone().reshaped(shape)?),
            (LayerSpec::Softmax, Cache::Softmax { probs }) => {
                Some(layers::softmax_backward(probs, &dy))
            }
            _ => unreachable!("cache does not match layer {}", layer.name()),
        };
        match dx {
            Some(d) => dy = d,
            None => break,
        }
    }
    let params_out = grads
        .into_iter()
        .zip(params)
        .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.tensor.shape())))
        .collect();
    let input = if need_input_grad { Some(dy) } else { None };
    Ok(Gradients {
        params: params_out,
        input,
    })
}

/// Predicted class and probabilities for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub label: usize,
    pub probs: Vec<T>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> Checkpoint<T> {
    pub fn network(&self) -> Result<Network> {
        Network::new(&self.arch)
    }

    /// Evaluation-mode forward; buffers are not touched.
    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let net = self.network()?;
        let mut buffers = self.buffers.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(forward(&net, &self.params, &mut buffers, input, Mode::Eval, &mut rng)?.probs)
    }

    /// Argmax of the evaluation-mode forward, in chunks of `chunk` samples.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Vec<Prediction<T>>> {
        const CHUNK: usize = 32;
        let net = self.network()?;
        let input = conform_input(&net, input)?;
        let b = input.batch();
        let mut out = Vec::with_capacity(b);
        let mut buffers = self.buffers.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for start in (0..b).step_by(CHUNK) {
            let idx: Vec<usize> = (start..(start + CHUNK).min(b)).collect();
            let chunk = input.gather_rows(&idx);
            let probs = forward(&net, &self.params, &mut buffers, &chunk, Mode::Eval, &mut rng)?.probs;
            for row in probs.data().chunks_exact(probs.last_dim()) {
                out.push(Prediction {
                    label: argmax(row),
                    probs: row.to_vec(),
                });
            }
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Same weights in another precision.
    pub fn cast<U: Scalar>(&self) -> Checkpoint<U> {
        let cast_named = |v: &[NamedTensor<T>]| {
            v.iter()
                .map(|n| NamedTensor {
                    name: n.name.clone(),
                    tensor: n.tensor.cast(),
                })
                .collect()
        };
        Checkpoint {
            arch: self.arch.clone(),
            params: cast_named(&self.params),
            buffers: cast_named(&self.buffers),
            optimizer: AdamState {
                step: self.optimizer.step,
                m: self.optimizer.m.iter().map(Tensor::cast).collect(),
                v: self.optimizer.v.iter().map(Tensor::cast).collect(),
            },
            rng: self.rng.clone(),
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    fn arch(json: &str) -> ArchConfig {
        ArchConfig::from_json(json).unwrap()
    }

    fn tiny_raw() -> ArchConfig {
        arch(r#"{"schema_version":1,"name":"t","input":"raw6s","raw_seconds":0.002,"n_classes":3,
            "layers":[{"type":"conv1d","filters":4,"kernel":5,"stride":2},{"type":"relu"},
            {"type":"batch_norm"},{"type":"dropout","rate":0.25},{"type":"flatten"},
            {"type":"dense","units":3},{"type":"softmax"}]}"#)
    }

    #[test]
    fn init_is_deterministic() {
        let a: Checkpoint<f32> = init_parameters(&tiny_raw(), 5).unwrap();
        let b: Checkpoint<f32> = init_parameters(&tiny_raw(), 5).unwrap();
        assert_eq!(a, b);
        let c: Checkpoint<f32> = init_parameters(&tiny_raw(), 6).unwrap();
        assert_ne!(a.params, c.params);
        let beta = a.params.iter().find(|p| p.name.ends_with("batch_norm.beta")).unwrap();
        assert!(beta.tensor.data().iter().all(|&v| v == 0.0));
        let w = &a.params[0].tensor;
        let bound = (6.0f32 / 5.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn dense_from_2432_to_8() {
        let a = arch(r#"{"schema_version":1,"name":"d","input":"mfcc","n_classes":8,
            "layers":[{"type":"flatten"},{"type":"dense","units":2432},{"type":"dense","units":8},{"type":"softmax"}]}"#);
        let ck: Checkpoint<f32> = init_parameters(&a, 0).unwrap();
        let w = ck.params.iter().find(|p| p.name == "02.dense.weight").unwrap();
        assert_eq!(w.tensor.shape(), &[2432, 8]);
    }

    #[test]
    fn lstm_forget_bias_is_one() {
        let a = arch(r#"{"schema_version":1,"name":"l","input":"mfcc","n_classes":2,
            "layers":[{"type":"lstm","units":3},{"type":"dense","units":2},{"type":"softmax"}]}"#);
        let ck: Checkpoint<f64> = init_parameters(&a, 0).unwrap();
        assert_eq!(ck.params[2].tensor.data(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn raw_input_accepts_channel_first_view() {
        let ck: Checkpoint<f64> = init_parameters(&tiny_raw(), 1).unwrap();
        let x = Tensor::from_vec(&[2, 1, 32], (0..64).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let p = ck.forward_eval(&x).unwrap();
        assert_eq!(p.shape(), &[2, 3]);
        let bad = Tensor::<f64>::zeros(&[2, 1, 31]);
        match ck.forward_eval(&bad) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, "input"),
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn zero_rate_dropout_matches_eval() {
        let a = arch(r#"{"schema_version":1,"name":"t","input":"raw6s","raw_seconds":0.002,"n_classes":3,
            "layers":[{"type":"conv1d","filters":4,"kernel":5,"stride":2},{"type":"relu"},
            {"type":"dropout","rate":0.0},{"type":"flatten"},{"type":"dense","units":3},{"type":"softmax"}]}"#);
        let ck: Checkpoint<f64> = init_parameters(&a, 2).unwrap();
        let net = ck.network().unwrap();
        let x = Tensor::from_vec(&[3, 32, 1], (0..96).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ck.buffers.clone();
        let train = forward(&net, &ck.params, &mut buf, &x, Mode::Train, &mut rng).unwrap();
        assert_eq!(train.probs, ck.forward_eval(&x).unwrap());
    }

    #[test]
    fn predict_ties_and_repeatability() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        let ck: Checkpoint<f32> = init_parameters(&tiny_raw(), 3).unwrap();
        let x = Tensor::from_vec(&[4, 32, 1], (0..128).map(|i| (i as f32 * 0.3).sin()).collect()).unwrap();
        assert_eq!(ck.predict(&x).unwrap(), ck.predict(&x).unwrap());
    }

    #[test]
    fn rng_state_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(3);
        let _: u64 = rng.gen();
        let state = RngState::capture(&rng);
        let mut back = state.restore().unwrap();
        assert_eq!(rng.gen::<u64>(), back.gen::<u64>());
    }

    #[test]
    fn zero_upstream_all_zero() {
        let ck: Checkpoint<f64> = init_parameters(&tiny_raw(), 4).unwrap();
        let net = ck.network().unwrap();
        let x = Tensor::from_vec(&[2, 32, 1], (0..64).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ck.buffers.clone();
        let pass = forward(&net, &ck.params, &mut buf, &x, Mode::Train, &mut rng).unwrap();
        let g = backward(&net, &ck.params, &pass, &Tensor::zeros(&[2, 3]), GradientEntry::Logits, true).unwrap();
        assert!(g.params.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(batch in 1usize..5, feat in 1usize..6, classes in 2usize..9, seed in any::<u64>()) {
            let a = ArchConfig {
                schema_version: 1,
                name: "p".into(),
                input: InputKind::Mfcc,
                raw_seconds: None,
                n_classes: classes,
                layers: vec![
                    LayerSpec::Dense { units: feat },
                    LayerSpec::Flatten,
                    LayerSpec::Dense { units: classes },
                    LayerSpec::Softmax,
                ],
            };
            let ck: Checkpoint<f32> = init_parameters(&a, seed).unwrap();
            let shape = Network::new(&a).unwrap().batch_shape(batch);
            let n: usize = shape.iter().product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(-3.0f32..3.0)).collect()).unwrap();
            let p = ck.forward_eval(&x).unwrap();
            for row in p.data().chunks(classes) {
                prop_assert!((row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
}
