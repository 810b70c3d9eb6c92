use num_complex::Complex;

use crate::{Error, Result, Scalar};

/// Iterative radix-2 decimation-in-time FFT.
///
/// `buf.len()` must be a power of two.
pub fn fft_in_place<T: Scalar>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // twiddles computed in f64 so f32 transforms stay accurate
        let twiddles: Vec<Complex<T>> = (0..half)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex::new(T::of(angle.cos()), T::of(angle.sin()))
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// `|X_k|^2` for `k = 0..=n_fft/2`, with `frame` zero-padded to `n_fft`.
pub fn power_spectrum<T: Scalar>(frame: &[T], n_fft: usize) -> Result<Vec<T>> {
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(Error::Config(format!("n_fft {n_fft} is not a power of two")));
    }
    if frame.len() > n_fft {
        return Err(Error::Config(format!(
            "frame of {} samples exceeds n_fft {n_fft}",
            frame.len()
        )));
    }
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for (dst, &x) in buf.iter_mut().zip(frame) {
        dst.re = x;
    }
    fft_in_place(&mut buf);
    Ok(buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn naive_power(x: &[f64], n: usize) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn zero_frame() {
        assert!(power_spectrum(&[0.0f64; 300], 512).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn bin_aligned_cosine() {
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 4.0 * t as f64 / n as f64).cos())
            .collect();
        let p = power_spectrum(&x, n).unwrap();
        let oracle = naive_power(&x, n);
        let peak = (n as f64 / 2.0).powi(2);
        assert!((p[4] - peak).abs() / peak < 1e-9);
        assert!((oracle[4] - peak).abs() / peak < 1e-9);
        for (k, &v) in p.iter().enumerate() {
            if k != 4 {
                assert!(v < 1e-12 * peak, "bin {k} = {v}");
            }
        }
    }

    #[test]
    fn random_frames_match_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1usize, 7, 100, 256] {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = power_spectrum(&x, 256).unwrap();
            let q = naive_power(&x, 256);
            let scale = q.iter().cloned().fold(0.0, f64::max);
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(power_spectrum(&[0.0f32; 4], 1000), Err(Error::Config(_))));
        assert!(matches!(power_spectrum(&[0.0f32; 9], 8), Err(Error::Config(_))));
    }
}
