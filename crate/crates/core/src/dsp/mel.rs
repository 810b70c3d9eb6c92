use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// HTK mel scale: `2595 log10(1 + f / 700)`.
pub fn mel_scale(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_inverse(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    /// `None` means the Nyquist frequency.
    pub f_max: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 128,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn f_max_for(&self, sample_rate: u32) -> f64 {
        self.f_max.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let f_max = self.f_max_for(sample_rate);
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < f_max && f_max <= nyquist) {
            return Err(Error::Config(format!(
                "mel range [{}, {f_max}] invalid for Nyquist {nyquist}",
                self.f_min
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Triangular mel filters stored sparsely: each row keeps the contiguous
/// run of bins where it is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    n_bins: usize,
    centers_hz: Vec<f64>,
    edges_hz: (f64, f64),
    rows: Vec<(usize, Vec<T>)>,
}

impl<T: Scalar> MelFilterbank<T> {
    pub fn n_mels(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Filter peak frequencies in Hz.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Lower edge of the first filter and upper edge of the last.
    pub fn edges_hz(&self) -> (f64, f64) {
        self.edges_hz
    }

    /// Dense `n_mels x n_bins` copy.
    pub fn dense(&self) -> Vec<Vec<T>> {
        self.rows
            .iter()
            .map(|(start, w)| {
                let mut row = vec![T::zero(); self.n_bins];
                row[*start..start + w.len()].copy_from_slice(w);
                row
            })
            .collect()
    }

    /// Filterbank energies of one power spectrum.
    pub fn apply(&self, power: &[T], out: &mut [T]) {
        debug_assert_eq!(power.len(), self.n_bins);
        for (o, (start, w)) in out.iter_mut().zip(&self.rows) {
            *o = w.iter().zip(&power[*start..]).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// Builds triangular filters whose peaks are equally spaced in mel between
/// `mel(f_min)` and `mel(f_max)`; filter `m` rises from point `m` to point
/// `m + 1` and falls to point `m + 2`. Weights are evaluated at the exact
/// bin frequencies `k * sr / n_fft`.
pub fn mel_filterbank<T: Scalar>(
    cfg: &MelConfig,
    n_fft: usize,
    sample_rate: u32,
) -> Result<MelFilterbank<T>> {
    cfg.validate(sample_rate)?;
    let n_bins = n_fft / 2 + 1;
    let (lo, hi) = (mel_scale(cfg.f_min), mel_scale(cfg.f_max_for(sample_rate)));
    let points: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_inverse(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;

    let mut rows = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
        let weights: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                up.min(down).max(0.0)
            })
            .collect();
        let first = weights.iter().position(|&w| w > 0.0);
        let Some(first) = first else {
            return Err(Error::Config(format!(
                "mel filter {m} ({center:.1} Hz) covers no FFT bin; reduce n_mels or raise n_fft"
            )));
        };
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap();
        rows.push((first, weights[first..=last].iter().map(|&w| T::of(w)).collect()));
    }
    Ok(MelFilterbank {
        n_bins,
        centers_hz: points[1..=cfg.n_mels].to_vec(),
        edges_hz: (points[0], points[cfg.n_mels + 1]),
        rows,
    })
}
