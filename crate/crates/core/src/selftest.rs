//! Runtime self-checks: gradient checks per layer type and DSP oracles.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{dct_basis, frame_count, power_spectrum, MfccConfig, PreprocessConfig, StftConfig};
use crate::nn::{gradient_check, ArchConfig, GradCheckConfig, GradientEntry, Tensor};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value < self.tolerance
    }
}

fn arch(raw_samples: usize, classes: usize, layers: &str) -> ArchConfig {
    ArchConfig::from_json(&format!(
        r#"{{"schema_version":1,"name":"check","input":"raw6s","raw_seconds":{},"n_classes":{classes},"layers":[{layers}]}}"#,
        raw_samples as f64 / 16000.0
    ))
    .expect("self-check arch")
}

pub struct GradientCase {
    pub name: &'static str,
    /// Layer kind whose parameters must appear in the report.
    pub kind: &'static str,
    pub arch: ArchConfig,
    pub entry: GradientEntry,
    /// Inputs are drawn uniformly from `[-scale, scale]`.
    pub input_scale: f64,
}

/// Tiny networks that exercise each layer type.
pub fn gradient_cases() -> Vec<GradientCase> {
    let dense = r#"{"type":"dense","units":4},{"type":"flatten"},{"type":"dense","units":3},{"type":"softmax"}"#;
    let conv = r#"{"type":"conv1d","filters":6,"kernel":5,"stride":2},{"type":"relu"},{"type":"dropout","rate":0.25},
        {"type":"conv1d","filters":4,"kernel":3},{"type":"flatten"},{"type":"dense","units":3},{"type":"softmax"}"#;
    let bn = r#"{"type":"conv1d","filters":64,"kernel":3},{"type":"relu"},{"type":"batch_norm"},
        {"type":"flatten"},{"type":"dense","units":3},{"type":"softmax"}"#;
    let lstm = r#"{"type":"lstm","units":5},{"type":"dense","units":3},{"type":"softmax"}"#;
    let case = |name, kind, arch, entry, input_scale| GradientCase {
        name,
        kind,
        arch,
        entry,
        input_scale,
    };
    vec![
        case("Dense", "dense", arch(16, 3, dense), GradientEntry::Logits, 1.0),
        case("Conv1D", "conv1d", arch(16, 3, conv), GradientEntry::Logits, 1.0),
        case("BatchNorm", "batch_norm", arch(16, 3, bn), GradientEntry::Logits, 1.0),
        case("LSTM", "lstm", arch(4, 3, lstm), GradientEntry::Logits, 3.0),
        case("Softmax+CE", "dense", arch(16, 3, dense), GradientEntry::Probabilities, 1.0),
    ]
}

pub fn gradient_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for c in gradient_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = vec![4];
        shape.extend(c.arch.input_shape());
        let n: usize = shape.iter().product();
        let s = c.input_scale;
        let x = Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(-s..s)).collect())?;
        let labels = [0, 1, 2, 1];
        let cfg = GradCheckConfig {
            seed,
            entry: c.entry,
            ..GradCheckConfig::default()
        };
        let report = gradient_check(&c.arch, &x, &labels, &cfg)?;
        let worst = report.kinds.get(c.kind).map_or(f64::INFINITY, |k| {
            if k.checked == 0 {
                f64::INFINITY
            } else {
                k.max_rel_error
            }
        });
        out.push(CheckOutcome {
            name: format!("gradient {}", c.name),
            value: worst.max(report.max_rel_error()),
            tolerance: 1e-5,
        });
    }
    Ok(out)
}

/// Worst relative difference between the FFT power spectrum and a direct
/// DFT over random frames.
pub fn fft_suite(frames: usize, n_fft: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..frames {
        let x: Vec<f64> = (0..n_fft).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = power_spectrum(&x, n_fft)?;
        let scale = fast.iter().cloned().fold(0.0, f64::max).max(1e-300);
        for (k, f) in fast.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((k * n) % n_fft) as f64 / n_fft as f64;
                acc += Complex::new(ang.cos(), ang.sin()) * v;
            }
            worst = worst.max((f - acc.norm_sqr()).abs() / scale);
        }
    }
    Ok(CheckOutcome {
        name: format!("FFT vs DFT ({frames} frames of {n_fft})"),
        value: worst,
        tolerance: 1e-6,
    })
}

/// Largest deviation of `B B^T` from the identity for the orthonormal DCT-II.
pub fn dct_suite(n: usize) -> CheckOutcome {
    let b = dct_basis(n);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    CheckOutcome {
        name: format!("DCT-II orthonormality (n = {n})"),
        value: worst,
        tolerance: 1e-9,
    }
}

/// Frame counts implied by the default configs: `(mfcc, logmel)`.
pub fn frame_contracts() -> ((usize, usize), (usize, usize)) {
    let stft = StftConfig::default();
    let pre = PreprocessConfig::default();
    let rate = pre.sample_rate;
    let (win, hop) = (stft.win_len(rate), stft.hop_len(rate));
    let mf = MfccConfig::default();
    let mf_len = (mf.clip_seconds * rate as f64).round() as usize;
    (
        (frame_count(mf_len, win, hop), mf.n_mfcc),
        (frame_count(pre.target_len(), win, hop), mf.mel.n_mels),
    )
}

pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = gradient_suite(seed)?;
    out.push(fft_suite(200, 1024, seed)?);
    out.push(dct_suite(128));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all(3).unwrap().into_iter().chain((0..6).flat_map(|s| gradient_suite(s).unwrap())) {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn contracts() {
        assert_eq!(frame_contracts(), ((248, 40), (598, 128)));
    }
}
