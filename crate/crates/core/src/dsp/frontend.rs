//! Waveform preprocessing and the two hand-crafted feature pipelines.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{fft_in_place, hamming, mel_filterbank, DctPlan, MelConfig, MelFilterbank};
use crate::audio::{resample_linear, Waveform, CANONICAL_RATE};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_seconds: f64,
    pub sample_rate: u32,
    /// Variance floor for z-scoring.
    pub epsilon: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_seconds: 6.0,
            sample_rate: CANONICAL_RATE,
            epsilon: 1e-12,
        }
    }
}

impl PreprocessConfig {
    pub fn target_len(&self) -> usize {
        (self.target_seconds * self.sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_seconds: f64,
    pub hop_seconds: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            win_seconds: 0.025,
            hop_seconds: 0.010,
        }
    }
}

impl StftConfig {
    pub fn win_len(&self, sample_rate: u32) -> usize {
        (self.win_seconds * sample_rate as f64).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_seconds * sample_rate as f64).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let (win, hop) = (self.win_len(sample_rate), self.hop_len(sample_rate));
        if !self.n_fft.is_power_of_two() {
            return Err(Error::Config(format!("n_fft {} is not a power of two", self.n_fft)));
        }
        if win < 2 || hop == 0 || hop > win || win > self.n_fft {
            return Err(Error::Config(format!(
                "need 0 < hop ({hop}) <= win ({win}) <= n_fft ({})",
                self.n_fft
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_mfcc: usize,
    pub clip_seconds: f64,
    pub mel: MelConfig,
    pub epsilon: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_mfcc: 40,
            clip_seconds: 2.5,
            mel: MelConfig::default(),
            epsilon: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Logmel,
    Mfcc,
}

impl FeatureKind {
    pub fn tag(self) -> u32 {
        match self {
            FeatureKind::Logmel => 1,
            FeatureKind::Mfcc => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            1 => Some(FeatureKind::Logmel),
            2 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }
}

/// Frames x coefficients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub values: Vec<T>,
    pub frames: usize,
    pub coeffs: usize,
    pub frame_rate: f64,
    pub kind: FeatureKind,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn row(&self, frame: usize) -> &[T] {
        &self.values[frame * self.coeffs..(frame + 1) * self.coeffs]
    }

    pub fn get(&self, frame: usize, coeff: usize) -> T {
        self.values[frame * self.coeffs + coeff]
    }
}

/// Subtracts the mean and divides by the population standard deviation.
/// Signals with variance `<= eps` are only mean-subtracted.
pub fn normalize_zscore<T: Scalar>(w: &Waveform<T>, eps: f64) -> Waveform<T> {
    let n = w.samples.len().max(1) as f64;
    let mean = w.samples.iter().map(|s| s.to_f64_lossy()).sum::<f64>() / n;
    let var = w
        .samples
        .iter()
        .map(|s| (s.to_f64_lossy() - mean).powi(2))
        .sum::<f64>()
        / n;
    let scale = if var > eps { 1.0 / var.sqrt() } else { 1.0 };
    let samples = w
        .samples
        .iter()
        .map(|s| T::of((s.to_f64_lossy() - mean) * scale))
        .collect();
    Waveform::new(samples, w.sample_rate)
}

/// Truncates or zero-pads at the end to `round(target_seconds * rate)`.
pub fn fix_length<T: Scalar>(w: &Waveform<T>, cfg: &PreprocessConfig) -> Waveform<T> {
    let n = (cfg.target_seconds * w.sample_rate as f64).round() as usize;
    let mut samples = w.samples.clone();
    samples.resize(n, T::zero());
    Waveform::new(samples, w.sample_rate)
}

/// `floor((len - win) / hop) + 1`, or one zero-padded frame for short input.
pub fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if len <= win {
        1
    } else {
        (len - win) / hop + 1
    }
}

fn ensure_rate<T: Scalar>(w: &Waveform<T>, rate: u32) -> Waveform<T> {
    if w.sample_rate == rate {
        w.clone()
    } else {
        resample_linear(w, rate)
    }
}

/// Framing, Hamming window, power spectrum, mel filterbank and log on an
/// already preprocessed signal.
pub fn log_mel_from_fixed<T: Scalar>(
    samples: &[T],
    sample_rate: u32,
    stft: &StftConfig,
    bank: &MelFilterbank<T>,
    log_floor: f64,
) -> Result<FeatureMatrix<T>> {
    stft.validate(sample_rate)?;
    if bank.n_bins() != stft.n_fft / 2 + 1 {
        return Err(Error::Config("filterbank built for a different n_fft".into()));
    }
    let win = stft.win_len(sample_rate);
    let hop = stft.hop_len(sample_rate);
    let window: Vec<T> = hamming(win)?;
    let frames = frame_count(samples.len(), win, hop);
    let n_mels = bank.n_mels();
    let floor = T::of(log_floor);

    let mut values = vec![T::zero(); frames * n_mels];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); stft.n_fft];
    let mut power = vec![T::zero(); stft.n_fft / 2 + 1];
    for f in 0..frames {
        let start = f * hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        for (i, &wv) in window.iter().enumerate() {
            if let Some(&s) = samples.get(start + i) {
                buf[i].re = s * wv;
            }
        }
        fft_in_place(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        let row = &mut values[f * n_mels..(f + 1) * n_mels];
        bank.apply(&power, row);
        row.iter_mut().for_each(|v| *v = (*v + floor).ln());
    }
    Ok(FeatureMatrix {
        values,
        frames,
        coeffs: n_mels,
        frame_rate: sample_rate as f64 / hop as f64,
        kind: FeatureKind::Logmel,
    })
}

/// normalize -> fix_length -> STFT -> mel -> log.
pub fn log_mel_spectrogram<T: Scalar>(
    w: &Waveform<T>,
    pre: &PreprocessConfig,
    stft: &StftConfig,
    mel: &MelConfig,
) -> Result<FeatureMatrix<T>> {
    if w.is_empty() {
        return Err(Error::Config("empty waveform".into()));
    }
    let w = ensure_rate(w, pre.sample_rate);
    let w = fix_length(&normalize_zscore(&w, pre.epsilon), pre);
    let bank = mel_filterbank(mel, stft.n_fft, pre.sample_rate)?;
    log_mel_from_fixed(&w.samples, pre.sample_rate, stft, &bank, mel.log_floor)
}

/// normalize -> clip/pad to `clip_seconds` -> log-mel -> DCT per frame.
/// Runs at the waveform's own sample rate.
pub fn mfcc<T: Scalar>(
    w: &Waveform<T>,
    cfg: &MfccConfig,
    stft: &StftConfig,
) -> Result<FeatureMatrix<T>> {
    if w.is_empty() {
        return Err(Error::Config("empty waveform".into()));
    }
    if cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.mel.n_mels {
        return Err(Error::Config(format!(
            "n_mfcc {} must be in 1..={}",
            cfg.n_mfcc, cfg.mel.n_mels
        )));
    }
    let pre = PreprocessConfig {
        target_seconds: cfg.clip_seconds,
        sample_rate: w.sample_rate,
        epsilon: cfg.epsilon,
    };
    let fixed = fix_length(&normalize_zscore(w, pre.epsilon), &pre);
    let bank = mel_filterbank(&cfg.mel, stft.n_fft, w.sample_rate)?;
    let logmel = log_mel_from_fixed(&fixed.samples, w.sample_rate, stft, &bank, cfg.mel.log_floor)?;
    let plan = DctPlan::new(logmel.coeffs, cfg.n_mfcc);
    let mut values = vec![T::zero(); logmel.frames * cfg.n_mfcc];
    for f in 0..logmel.frames {
        plan.apply(logmel.row(f), &mut values[f * cfg.n_mfcc..(f + 1) * cfg.n_mfcc]);
    }
    Ok(FeatureMatrix {
        values,
        frames: logmel.frames,
        coeffs: cfg.n_mfcc,
        frame_rate: logmel.frame_rate,
        kind: FeatureKind::Mfcc,
    })
}

/// Per-coefficient mean over frames.
pub fn summarize_mean<T: Scalar>(fm: &FeatureMatrix<T>) -> Vec<T> {
    let mut acc = vec![0.0f64; fm.coeffs];
    for f in 0..fm.frames {
        for (a, v) in acc.iter_mut().zip(fm.row(f)) {
            *a += v.to_f64_lossy();
        }
    }
    acc.into_iter()
        .map(|a| T::of(a / fm.frames.max(1) as f64))
        .collect()
}
