use super::Waveform;
use crate::Scalar;

/// Linear-interpolation resampler. Output sample `j` sits at source
/// position `j * from / to`; the final source sample is held past the end.
pub fn resample_linear<T: Scalar>(w: &Waveform<T>, target_rate: u32) -> Waveform<T> {
    assert!(target_rate > 0, "target rate must be positive");
    if w.sample_rate == target_rate || w.samples.is_empty() {
        return Waveform::new(w.samples.clone(), target_rate);
    }
    let n_in = w.samples.len();
    let n_out = ((n_in as f64) * target_rate as f64 / w.sample_rate as f64).round() as usize;
    let step = w.sample_rate as f64 / target_rate as f64;
    let last = n_in - 1;
    let samples = (0..n_out)
        .map(|j| {
            let pos = j as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return w.samples[last];
            }
            let frac = T::of(pos - i as f64);
            let (a, b) = (w.samples[i], w.samples[i + 1]);
            a + (b - a) * frac
        })
        .collect();
    Waveform::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_rate_is_identity() {
        let w = Waveform::new(vec![0.1f64, -0.3, 0.7], 16000);
        assert_eq!(resample_linear(&w, 16000), w);
    }

    #[test]
    fn constant_stays_constant() {
        for (from, to) in [(8000, 16000), (44100, 16000), (16000, 22050)] {
            let w = Waveform::new(vec![0.375f64; 1000], from);
            let r = resample_linear(&w, to);
            assert_eq!(r.sample_rate, to);
            assert_eq!(r.samples.len(), (1000.0 * to as f64 / from as f64).round() as usize);
            assert!(r.samples.iter().all(|&s| (s - 0.375).abs() < 1e-15));
        }
    }

    #[test]
    fn ramp_upsampled_hits_midpoints() {
        let ramp: Vec<f64> = (0..8000).map(|i| i as f64).collect();
        let r = resample_linear(&Waveform::new(ramp.clone(), 8000), 16000);
        assert_eq!(r.samples.len(), 16000);
        for i in 0..7999 {
            assert_eq!(r.samples[2 * i], ramp[i]);
            assert_eq!(r.samples[2 * i + 1], (ramp[i] + ramp[i + 1]) / 2.0);
        }
    }
}
