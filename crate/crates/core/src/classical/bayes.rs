use super::{Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes; statistics are held in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// `[class][feature]`
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub log_priors: Vec<f64>,
}

pub fn fit_gnb<T: Scalar>(data: &FeatureSet<T>) -> Result<GaussianNb> {
    let (k, d) = (data.n_classes(), data.dim());
    let counts = data.class_counts();
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::Fit(format!(
            "naive Bayes needs at least 2 samples per class; class {c} has {}",
            counts[c]
        )));
    }
    let mut means = vec![vec![0.0; d]; k];
    for i in 0..data.len() {
        let m = &mut means[data.label(i)];
        for (a, v) in m.iter_mut().zip(data.row(i)) {
            *a += v.to_f64_lossy();
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    let mut variances = vec![vec![0.0; d]; k];
    for i in 0..data.len() {
        let c = data.label(i);
        for ((s, v), mu) in variances[c].iter_mut().zip(data.row(i)).zip(&means[c]) {
            *s += (v.to_f64_lossy() - mu).powi(2);
        }
    }
    for (v, &n) in variances.iter_mut().zip(&counts) {
        v.iter_mut().for_each(|s| *s = (*s / n as f64).max(VARIANCE_FLOOR));
    }
    let total = data.len() as f64;
    Ok(GaussianNb {
        means,
        variances,
        log_priors: counts.iter().map(|&n| (n as f64 / total).ln()).collect(),
    })
}

impl GaussianNb {
    pub fn log_joint<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(lp, (m, v))| {
                lp + x
                    .iter()
                    .zip(m.iter().zip(v))
                    .map(|(xi, (mu, var))| -0.5 * (ln_2pi + var.ln() + (xi.to_f64_lossy() - mu).powi(2) / var))
                    .sum::<f64>()
            })
            .collect()
    }
}

impl<T: Scalar> Classifier<T> for GaussianNb {
    fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        let lj = self.log_joint(x);
        let m = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lj.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }
}
