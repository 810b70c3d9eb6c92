use super::Tensor;
use crate::{Error, Result, Scalar};

pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood of `labels` under `probs: [B, C]`, with the
/// fused softmax gradient `(probs - onehot) / B` with respect to the logits.
pub fn cross_entropy_loss<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let classes = probs.last_dim();
    let batch = probs.len() / classes.max(1);
    if labels.len() != batch {
        return Err(Error::shape(
            "loss",
            format!("{} labels for batch of {batch}", labels.len()),
        ));
    }
    let mut grad = probs.clone();
    let inv_b = T::of(1.0 / batch as f64);
    let mut loss = 0.0;
    for (row, &label) in grad.data_mut().chunks_exact_mut(classes).zip(labels) {
        if label >= classes {
            return Err(Error::Label(format!("label {label} outside {classes} classes")));
        }
        loss -= row[label].to_f64_lossy().max(PROB_FLOOR).ln();
        row[label] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_b);
    }
    Ok((loss / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let p = Tensor::from_vec(&[1, 3], vec![0.0f64, 1.0, 0.0]).unwrap();
        assert!(cross_entropy_loss(&p, &[1]).unwrap().0 <= 1e-6);
    }

    #[test]
    fn uniform_eight() {
        let p = Tensor::full(&[1, 8], 0.125f64);
        let (loss, grad) = cross_entropy_loss(&p, &[0]).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-12);
        assert!((loss - 2.0794).abs() < 1e-4);
        let mut expect = [0.125; 8];
        expect[0] = -0.875;
        assert_eq!(grad.data(), &expect[..]);
    }

    #[test]
    fn zero_probability_is_floored() {
        let p = Tensor::from_vec(&[1, 2], vec![1.0f32, 0.0]).unwrap();
        let (loss, _) = cross_entropy_loss(&p, &[1]).unwrap();
        assert!((loss - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        let p = Tensor::full(&[2, 3], 1.0f32 / 3.0);
        assert!(matches!(cross_entropy_loss(&p, &[0, 3]), Err(Error::Label(_))));
    }
}
