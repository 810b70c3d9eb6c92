//! Declarative network descriptions and their shape inference.

use serde::{Deserialize, Serialize};

use crate::dsp::{frame_count, MfccConfig, PreprocessConfig, StftConfig};
use crate::{Error, Result};

pub const ARCH_SCHEMA_VERSION: u32 = 1;

fn default_kernel() -> usize {
    5
}
fn default_stride() -> usize {
    1
}
fn default_momentum() -> f64 {
    0.99
}
fn default_bn_eps() -> f64 {
    1e-5
}

/// One layer. Convolutions are "valid" (no padding); dense and batch
/// normalization act on the last axis, so a dense layer after a sequence
/// is applied per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        filters: usize,
        #[serde(default = "default_kernel")]
        kernel: usize,
        #[serde(default = "default_stride")]
        stride: usize,
    },
    Relu,
    BatchNorm {
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default = "default_bn_eps")]
        eps: f64,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        units: usize,
    },
    Lstm {
        units: usize,
        #[serde(default)]
        return_sequences: bool,
    },
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Relu => "relu",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            LayerSpec::Conv1d { filters, kernel, stride } => {
                if filters == 0 || kernel == 0 || stride == 0 {
                    return Err("filters, kernel and stride must be >= 1".into());
                }
            }
            LayerSpec::Dense { units } | LayerSpec::Lstm { units, .. } => {
                if units == 0 {
                    return Err("units must be >= 1".into());
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerSpec::BatchNorm { momentum, eps } => {
                if !(0.0..1.0).contains(&momentum) || !(eps > 0.0) {
                    return Err("batch_norm needs momentum in [0, 1) and eps > 0".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Per-sample output shape, or a message describing the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Conv1d { filters, kernel, stride } => match input {
                [len, _channels] => {
                    if *len < kernel {
                        Err(format!("sequence length {len} shorter than kernel {kernel}"))
                    } else {
                        Ok(vec![(len - kernel) / stride + 1, filters])
                    }
                }
                _ => Err(format!("expects [length, channels], got {input:?}")),
            },
            LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::BatchNorm { .. } => {
                if input.is_empty() {
                    Err("needs at least one axis".into())
                } else {
                    Ok(input.to_vec())
                }
            }
            LayerSpec::Dense { units } => {
                if input.is_empty() {
                    return Err("needs at least one axis".into());
                }
                let mut out = input.to_vec();
                *out.last_mut().unwrap() = units;
                Ok(out)
            }
            LayerSpec::Lstm { units, return_sequences } => match input {
                [steps, _features] => Ok(if return_sequences {
                    vec![*steps, units]
                } else {
                    vec![units]
                }),
                _ => Err(format!("expects [steps, features], got {input:?}")),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Softmax => match input {
                [_classes] => Ok(input.to_vec()),
                _ => Err(format!("expects a flat class vector, got {input:?}")),
            },
        }
    }

    /// Names and shapes of trainable parameters given the input shape.
    pub fn parameter_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        let last = input.last().copied().unwrap_or(0);
        match *self {
            LayerSpec::Conv1d { filters, kernel, .. } => vec![
                ("weight", vec![kernel, last, filters]),
                ("bias", vec![filters]),
            ],
            LayerSpec::Dense { units } => vec![("weight", vec![last, units]), ("bias", vec![units])],
            LayerSpec::BatchNorm { .. } => vec![("gamma", vec![last]), ("beta", vec![last])],
            LayerSpec::Lstm { units, .. } => vec![
                ("w_input", vec![last, 4 * units]),
                ("w_recurrent", vec![units, 4 * units]),
                ("bias", vec![4 * units]),
            ],
            _ => vec![],
        }
    }

    /// Non-trainable state (batch norm running statistics).
    pub fn buffer_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        let last = input.last().copied().unwrap_or(0);
        match self {
            LayerSpec::BatchNorm { .. } => {
                vec![("running_mean", vec![last]), ("running_var", vec![last])]
            }
            _ => vec![],
        }
    }
}

/// What a network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Normalized waveform clipped or padded to a fixed duration.
    Raw6s,
    Mfcc,
    Logmel,
}

impl InputKind {
    pub fn frontend_name(self) -> &'static str {
        match self {
            InputKind::Raw6s => "raw",
            InputKind::Mfcc => "mfcc",
            InputKind::Logmel => "logmel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub schema_version: u32,
    pub name: String,
    pub input: InputKind,
    /// Clip duration for raw input; 6 s when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_seconds: Option<f64>,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

/// A layer with its resolved per-sample shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub index: usize,
    pub spec: LayerSpec,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
}

impl LayerPlan {
    pub fn name(&self) -> String {
        format!("{:02}.{}", self.index, self.spec.kind())
    }
}

impl ArchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let arch: ArchConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("arch config at `{}`: {}", e.path(), e.inner())))?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("arch config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn raw_seconds(&self) -> f64 {
        self.raw_seconds.unwrap_or(6.0)
    }

    /// Per-sample input shape: `[samples, 1]` for raw audio,
    /// `[frames, coefficients]` for features.
    pub fn input_shape(&self) -> Vec<usize> {
        let stft = StftConfig::default();
        let rate = PreprocessConfig::default().sample_rate;
        let (win, hop) = (stft.win_len(rate), stft.hop_len(rate));
        match self.input {
            InputKind::Raw6s => {
                let pre = PreprocessConfig {
                    target_seconds: self.raw_seconds(),
                    ..PreprocessConfig::default()
                };
                vec![pre.target_len(), 1]
            }
            InputKind::Mfcc => {
                let cfg = MfccConfig::default();
                let len = (cfg.clip_seconds * rate as f64).round() as usize;
                vec![frame_count(len, win, hop), cfg.n_mfcc]
            }
            InputKind::Logmel => {
                let len = PreprocessConfig::default().target_len();
                vec![frame_count(len, win, hop), crate::dsp::MelConfig::default().n_mels]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != ARCH_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {ARCH_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()
                .map_err(|m| Error::Config(format!("layers[{i}] ({}): {m}", l.kind())))?;
        }
        let n = self.layers.len();
        let tail_ok = n >= 2
            && self.layers[n - 1] == LayerSpec::Softmax
            && self.layers[n - 2] == LayerSpec::Dense { units: self.n_classes };
        if !tail_ok || self.n_classes == 0 {
            return Err(Error::Config(format!(
                "layers must end with dense(units = n_classes = {}) followed by softmax",
                self.n_classes
            )));
        }
        if let Some(s) = self.raw_seconds {
            if !(s > 0.0) {
                return Err(Error::Config("raw_seconds must be positive".into()));
            }
        }
        self.plan()?;
        Ok(())
    }

    /// Resolves shapes through the layer stack.
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        let mut shape = self.input_shape();
        let mut plans = Vec::with_capacity(self.layers.len());
        for (index, spec) in self.layers.iter().enumerate() {
            let out = spec
                .output_shape(&shape)
                .map_err(|m| Error::shape(format!("{index:02}.{}", spec.kind()), m))?;
            plans.push(LayerPlan {
                index,
                spec: spec.clone(),
                input_shape: shape,
                output_shape: out.clone(),
            });
            shape = out;
        }
        Ok(plans)
    }

    pub fn parameter_count(&self) -> Result<u128> {
        Ok(self
            .plan()?
            .iter()
            .flat_map(|p| p.spec.parameter_shapes(&p.input_shape))
            .map(|(_, s)| s.iter().map(|&d| d as u128).product::<u128>())
            .sum())
    }

    /// Same topology with the output layer resized.
    pub fn with_classes(&self, n_classes: usize) -> Self {
        let mut arch = self.clone();
        let n = arch.layers.len();
        if n >= 2 {
            if let LayerSpec::Dense { units } = &mut arch.layers[n - 2] {
                *units = n_classes;
            }
        }
        arch.n_classes = n_classes;
        arch
    }

    /// Same topology fed by a different frontend.
    pub fn with_input(&self, input: InputKind) -> Self {
        let mut arch = self.clone();
        arch.input = input;
        arch
    }

    /// The three published topologies, as shipped in `configs/arch`.
    pub fn reference_cnn() -> Self {
        Self::from_json(include_str!("../../configs/arch/cnn.json")).expect("bundled config")
    }

    pub fn reference_lstm() -> Self {
        Self::from_json(include_str!("../../configs/arch/lstm.json")).expect("bundled config")
    }

    pub fn reference_cnn_lstm() -> Self {
        Self::from_json(include_str!("../../configs/arch/cnn_lstm.json")).expect("bundled config")
    }

    /// Raw-input CNN with a quarter of the filters and stride 4 on every
    /// convolution; small enough to train on a CPU.
    /// Bundled configs by name: `cnn`, `lstm`, `cnn-lstm`, `cnn-small`.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "cnn" => Some(Self::reference_cnn()),
            "lstm" => Some(Self::reference_lstm()),
            "cnn-lstm" => Some(Self::reference_cnn_lstm()),
            "cnn-small" => Some(Self::small_raw_cnn()),
            _ => None,
        }
    }

    pub fn small_raw_cnn() -> Self {
        Self::from_json(include_str!("../../configs/arch/cnn_raw_small.json"))
            .expect("bundled config")
    }
}
