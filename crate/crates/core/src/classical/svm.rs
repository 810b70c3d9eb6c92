//! One-vs-rest linear SVM trained with Pegasos on standardized features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 50,
        }
    }
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<T: Scalar>(data: &FeatureSet<T>) -> Self {
        let (n, d) = (data.len() as f64, data.dim());
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v.to_f64_lossy();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v.to_f64_lossy() - m).powi(2);
            }
        }
        let scale = var.iter().map(|s| 1.0 / (s / n).sqrt().max(1e-12)).collect();
        Self { mean, scale }
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v.to_f64_lossy() - m) * s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub standardizer: Standardizer,
    /// `[class][feature..., bias]`
    pub weights: Vec<Vec<f64>>,
}

/// One binary Pegasos problem per class; labels `+1` for the class and `-1`
/// otherwise. The bias is an extra constant feature.
pub fn fit_linear_svm_ovr<T: Scalar>(data: &FeatureSet<T>, params: &SvmParams, seed: u64) -> Result<LinearSvm> {
    let k = data.n_classes();
    let present = data.class_counts().iter().filter(|&&c| c > 0).count();
    if k < 2 || present < 2 {
        return Err(Error::Fit("linear SVM needs at least two classes".into()));
    }
    if params.lambda <= 0.0 || params.epochs == 0 {
        return Err(Error::Config(format!("invalid SVM parameters {params:?}")));
    }
    let standardizer = Standardizer::fit(data);
    let xs: Vec<Vec<f64>> = (0..data.len())
        .map(|i| {
            let mut x = standardizer.apply(data.row(i));
            x.push(1.0);
            x
        })
        .collect();
    let d = data.dim() + 1;
    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let weights = (0..k)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut w = vec![0.0; d];
            // average of the iterates over the final epoch
            let mut avg = vec![0.0; d];
            let mut order: Vec<usize> = (0..xs.len()).collect();
            let mut t = 0u64;
            for epoch in 0..params.epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    t += 1;
                    let eta = 1.0 / (lambda * t as f64);
                    let y = if data.label(i) == c { 1.0 } else { -1.0 };
                    let margin = y * w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>();
                    let shrink = 1.0 - eta * lambda;
                    w.iter_mut().for_each(|v| *v *= shrink);
                    if margin < 1.0 {
                        for (v, x) in w.iter_mut().zip(&xs[i]) {
                            *v += eta * y * x;
                        }
                    }
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > radius {
                        w.iter_mut().for_each(|v| *v *= radius / norm);
                    }
                    if epoch + 1 == params.epochs {
                        for (a, v) in avg.iter_mut().zip(&w) {
                            *a += v;
                        }
                    }
                }
            }
            avg.iter_mut().for_each(|a| *a /= xs.len() as f64);
            avg
        })
        .collect();
    Ok(LinearSvm { standardizer, weights })
}

impl LinearSvm {
    pub fn margins<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        let mut z = self.standardizer.apply(x);
        z.push(1.0);
        self.weights
            .iter()
            .map(|w| w.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl<T: Scalar> Classifier<T> for LinearSvm {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    /// Softmax of the margins; uncalibrated, used only as stacking input.
    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        super::softmax_f64(&self.margins(x))
    }

    fn predict(&self, x: &[T]) -> usize {
        super::argmax_f64(&self.margins(x))
    }
}
