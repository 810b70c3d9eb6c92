use serde::{Deserialize, Serialize};

use super::{softmax_f64, Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub iterations: usize,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic regression; `weights[class] = [w..., bias]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    pub weights: Vec<Vec<f64>>,
}

/// Full-batch gradient descent from zero weights.
pub fn fit_logistic<T: Scalar>(data: &FeatureSet<T>, params: &LogisticParams) -> Result<Logistic> {
    if data.is_empty() {
        return Err(Error::Fit("logistic regression on an empty set".into()));
    }
    let (k, d, n) = (data.n_classes(), data.dim(), data.len());
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| data.row(i).iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let mut w = vec![vec![0.0; d + 1]; k];
    let mut grad = vec![vec![0.0; d + 1]; k];
    for _ in 0..params.iterations {
        grad.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
        for (x, i) in xs.iter().zip(0..) {
            let logits: Vec<f64> = w
                .iter()
                .map(|wc| wc[d] + wc[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let p = softmax_f64(&logits);
            for (c, g) in grad.iter_mut().enumerate() {
                let r = p[c] - f64::from(u8::from(data.label(i) == c));
                for (gv, xv) in g[..d].iter_mut().zip(x) {
                    *gv += r * xv;
                }
                g[d] += r;
            }
        }
        for (wc, g) in w.iter_mut().zip(&grad) {
            for j in 0..=d {
                let reg = if j < d { params.l2 * wc[j] } else { 0.0 };
                wc[j] -= params.learning_rate * (g[j] / n as f64 + reg);
            }
        }
    }
    Ok(Logistic { weights: w })
}

impl Logistic {
    pub fn logits<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        let d = x.len();
        self.weights
            .iter()
            .map(|wc| wc[d] + wc[..d].iter().zip(x).map(|(a, b)| a * b.to_f64_lossy()).sum::<f64>())
            .collect()
    }
}

impl<T: Scalar> Classifier<T> for Logistic {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        softmax_f64(&self.logits(x))
    }
}
