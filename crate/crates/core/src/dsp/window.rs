use crate::{Error, Result, Scalar};

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi k / (n - 1))`.
pub fn hamming<T: Scalar>(n: usize) -> Result<Vec<T>> {
    if n < 2 {
        return Err(Error::Config(format!("Hamming window needs n >= 2, got {n}")));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|k| T::of(0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos()))
        .collect())
}
