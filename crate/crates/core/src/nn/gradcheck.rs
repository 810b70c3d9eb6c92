//! Central-difference verification of the hand-written backward passes.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::cross_entropy_loss;
use super::model::{backward, forward, init_parameters, GradientEntry, Mode, NamedTensor, Network};
use super::{ArchConfig, Tensor};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates sampled per layer type (all of them if fewer exist).
    pub samples_per_kind: usize,
    pub seed: u64,
    /// `Logits` checks the fused softmax + cross-entropy gradient;
    /// `Probabilities` backpropagates `-1 / p` through the softmax layer.
    pub entry: GradientEntry,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            samples_per_kind: 100,
            seed: 0,
            entry: GradientEntry::Logits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KindResult {
    pub checked: usize,
    /// Coordinates dropped because a ReLU changed sign inside the stencil.
    pub skipped: usize,
    pub max_rel_error: f64,
}

/// Worst relative error per layer kind, plus `"input"` for the gradient
/// with respect to the network input (covers parameter-free layers).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub kinds: BTreeMap<String, KindResult>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.kinds.values().map(|k| k.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

struct Probe<'a> {
    net: &'a Network,
    buffers: &'a [NamedTensor<f64>],
    labels: &'a [usize],
    seed: u64,
}

impl Probe<'_> {
    /// Loss plus the ReLU sign pattern; dropout masks repeat because the rng
    /// is reseeded on every call.
    fn eval(&self, params: &[NamedTensor<f64>], x: &Tensor<f64>) -> Result<(f64, Vec<bool>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut buffers = self.buffers.to_vec();
        let pass = forward(self.net, params, &mut buffers, x, Mode::Train, &mut rng)?;
        let (loss, _) = cross_entropy_loss(&pass.probs, self.labels)?;
        Ok((loss, pass.relu_pattern()))
    }
}

/// Compares analytic gradients of the cross-entropy loss against central
/// differences on a freshly initialized copy of `arch`.
pub fn gradient_check(
    arch: &ArchConfig,
    input: &Tensor<f64>,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let ckpt = init_parameters::<f64>(arch, cfg.seed)?;
    let net = ckpt.network()?;
    let probe = Probe {
        net: &net,
        buffers: &ckpt.buffers,
        labels,
        seed: cfg.seed ^ 0x5eed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut buffers = ckpt.buffers.clone();
    let pass = forward(&net, &ckpt.params, &mut buffers, input, Mode::Train, &mut rng)?;
    let (_, dlogits) = cross_entropy_loss(&pass.probs, labels)?;
    let upstream = match cfg.entry {
        GradientEntry::Logits => dlogits,
        GradientEntry::Probabilities => {
            let k = pass.probs.last_dim();
            let b = labels.len() as f64;
            let mut g = Tensor::zeros(pass.probs.shape());
            for (i, &l) in labels.iter().enumerate() {
                let p = pass.probs.data()[i * k + l].max(super::loss::PROB_FLOOR);
                g.data_mut()[i * k + l] = -1.0 / (b * p);
            }
            g
        }
    };
    let analytic = backward(&net, &ckpt.params, &pass, &upstream, cfg.entry, true)?;
    let base_pattern = pass.relu_pattern();

    // (kind, param index, flat offset); param index None means the input.
    let mut coords: BTreeMap<String, Vec<(Option<usize>, usize)>> = BTreeMap::new();
    for (li, layer) in net.layers.iter().enumerate() {
        for pi in net.param_range(li) {
            let n = ckpt.params[pi].tensor.len();
            coords
                .entry(layer.spec.kind().to_string())
                .or_default()
                .extend((0..n).map(|o| (Some(pi), o)));
        }
    }
    coords.insert("input".into(), (0..input.len()).map(|o| (None, o)).collect());

    let mut pick = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    for (kind, all) in coords {
        let chosen: Vec<usize> = if all.len() <= cfg.samples_per_kind {
            (0..all.len()).collect()
        } else {
            let mut v = sample(&mut pick, all.len(), cfg.samples_per_kind).into_vec();
            v.sort_unstable();
            v
        };
        let mut res = KindResult::default();
        for i in chosen {
            let (target, offset) = all[i];
            let a = match target {
                Some(pi) => analytic.params[pi].data()[offset],
                None => analytic.input.as_ref().unwrap().data()[offset],
            };
            let mut params = ckpt.params.clone();
            let mut x = input.clone();
            let mut eval_at = |delta: f64| -> Result<(f64, Vec<bool>)> {
                let slot = match target {
                    Some(pi) => &mut params[pi].tensor.data_mut()[offset],
                    None => &mut x.data_mut()[offset],
                };
                let orig = *slot;
                *slot = orig + delta;
                let out = match target {
                    Some(_) => probe.eval(&params, input),
                    None => probe.eval(&ckpt.params, &x),
                };
                let slot = match target {
                    Some(pi) => &mut params[pi].tensor.data_mut()[offset],
                    None => &mut x.data_mut()[offset],
                };
                *slot = orig;
                out
            };
            let (plus, pat_plus) = eval_at(cfg.step)?;
            let (minus, pat_minus) = eval_at(-cfg.step)?;
            if pat_plus != base_pattern || pat_minus != base_pattern {
                res.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * cfg.step);
            res.checked += 1;
            res.max_rel_error = res.max_rel_error.max(relative_error(a, numeric));
        }
        report.kinds.insert(kind, res);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn random_input(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn check(json: &str, shape: &[usize], labels: &[usize]) -> GradCheckReport {
        let arch = ArchConfig::from_json(json).unwrap();
        let x = random_input(shape, 11);
        gradient_check(&arch, &x, labels, &GradCheckConfig::default()).unwrap()
    }

    #[test]
    fn dense_only() {
        let r = check(
            r#"{"schema_version":1,"name":"d","input":"mfcc","n_classes":3,"layers":[
            {"type":"dense","units":2},{"type":"flatten"},{"type":"dense","units":3},{"type":"softmax"}]}"#,
            &[2, 248, 40],
            &[0, 2],
        );
        assert!(r.kinds["dense"].checked >= 100);
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
    }

    #[test]
    fn conv_relu() {
        let r = check(
            r#"{"schema_version":1,"name":"c","input":"raw6s","raw_seconds":0.002,"n_classes":3,"layers":[
            {"type":"conv1d","filters":6,"kernel":5,"stride":2},{"type":"relu"},
            {"type":"conv1d","filters":4,"kernel":3,"stride":1},{"type":"flatten"},
            {"type":"dense","units":3},{"type":"softmax"}]}"#,
            &[3, 32, 1],
            &[0, 1, 2],
        );
        assert!(r.kinds["conv1d"].checked >= 100);
        assert!(r.max_rel_error() < 1e-5, "{r:?}");
    }

    #[test]
    fn lstm_four_steps() {
        let arch = ArchConfig {
            schema_version: 1,
            name: "l".into(),
            input: crate::nn::InputKind::Raw6s,
            raw_seconds: Some(4.0 / 16000.0),
            n_classes: 2,
            layers: vec![
                crate::nn::LayerSpec::Lstm { units: 5, return_sequences: false },
                crate::nn::LayerSpec::Dense { units: 2 },
                crate::nn::LayerSpec::Softmax,
            ],
        };
        let x = random_input(&[2, 4, 1], 3);
        let r = gradient_check(&arch, &x, &[1, 0], &GradCheckConfig::default()).unwrap();
        assert!(r.kinds["lstm"].checked >= 100);
        assert!(r.max_rel_error() < 1e-5, "{r:?}");
    }

    #[test]
    fn softmax_layer_backward() {
        let arch = ArchConfig::from_json(
            r#"{"schema_version":1,"name":"s","input":"raw6s","raw_seconds":0.001,"n_classes":4,"layers":[
            {"type":"flatten"},{"type":"dense","units":4},{"type":"softmax"}]}"#,
        )
        .unwrap();
        let x = random_input(&[3, 16, 1], 5);
        let cfg = GradCheckConfig {
            entry: GradientEntry::Probabilities,
            ..GradCheckConfig::default()
        };
        let r = gradient_check(&arch, &x, &[0, 3, 1], &cfg).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
    }
}
