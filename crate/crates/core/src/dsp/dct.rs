use crate::Scalar;

/// Orthonormal DCT-II basis, row `k` holds `s_k cos(pi k (2n + 1) / 2N)`.
pub fn dct_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| {
                    scale
                        * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64)
                            .cos()
                })
                .collect()
        })
        .collect()
}

/// Precomputed truncated orthonormal DCT-II.
#[derive(Debug, Clone)]
pub struct DctPlan<T> {
    n_in: usize,
    n_out: usize,
    basis: Vec<T>,
}

impl<T: Scalar> DctPlan<T> {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        assert!(n_out <= n_in, "n_out {n_out} exceeds input length {n_in}");
        let basis = dct_basis(n_in)
            .into_iter()
            .take(n_out)
            .flatten()
            .map(T::of)
            .collect();
        Self { n_in, n_out, basis }
    }

    pub fn apply(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.n_in);
        for (k, o) in out.iter_mut().enumerate().take(self.n_out) {
            let row = &self.basis[k * self.n_in..(k + 1) * self.n_in];
            *o = row.iter().zip(x).map(|(&b, &v)| b * v).sum();
        }
    }
}

/// First `n_out` coefficients of the orthonormal DCT-II of `x`.
pub fn dct2_ortho<T: Scalar>(x: &[T], n_out: usize) -> Vec<T> {
    let plan = DctPlan::new(x.len(), n_out);
    let mut out = vec![T::zero(); n_out];
    plan.apply(x, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Orthonormal DCT-III, the inverse of the DCT-II above.
    fn idct(c: &[f64]) -> Vec<f64> {
        let n = c.len();
        (0..n)
            .map(|i| {
                c.iter()
                    .enumerate()
                    .map(|(k, &ck)| {
                        let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                        s * ck * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_is_dc_only() {
        let c = dct2_ortho(&[2.5f64; 16], 16);
        assert!((c[0] - 2.5 * 4.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inverse_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let c = dct2_ortho(&x, 16);
        let back = idct(&c);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = c.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() < 1e-9);
    }

    #[test]
    fn truncation() {
        let x = [1.0f32, 2.0, 3.0, 4.0];
        let full = dct2_ortho(&x, 4);
        assert_eq!(dct2_ortho(&x, 2), full[..2].to_vec());
    }
}
