use super::{argmax_f64, Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Knn<T> {
    pub train: FeatureSet<T>,
    pub k: usize,
}

impl<T: Scalar> Knn<T> {
    pub fn new(train: FeatureSet<T>, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::Fit(format!("k = {k} with {} training samples", train.len())));
        }
        Ok(Self { train, k })
    }

    fn votes(&self, query: &[T]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = (0..self.train.len())
            .map(|i| {
                let d = self
                    .train
                    .row(i)
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).powi(2))
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        // stable, so equal distances keep input order
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut votes = vec![0; self.train.n_classes()];
        for &(_, i) in &dist[..self.k] {
            votes[self.train.label(i)] += 1;
        }
        votes
    }
}

/// Majority label among the `k` nearest training rows (Euclidean).
pub fn knn_predict<T: Scalar>(train: &FeatureSet<T>, query: &[T], k: usize) -> Result<usize> {
    let model = Knn::new(train.clone(), k)?;
    Ok(model.predict(query))
}

impl<T: Scalar> Classifier<T> for Knn<T> {
    fn n_classes(&self) -> usize {
        self.train.n_classes()
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        self.votes(x).iter().map(|&v| v as f64 / self.k as f64).collect()
    }

    fn predict(&self, x: &[T]) -> usize {
        argmax_f64(&self.predict_proba(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five() -> FeatureSet<f64> {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0]];
        FeatureSet::from_rows(&rows, vec![0, 0, 1, 1, 1], 2).unwrap()
    }

    #[test]
    fn k1_returns_own_label() {
        let d = five();
        for i in 0..d.len() {
            assert_eq!(knn_predict(&d, d.row(i), 1).unwrap(), d.label(i));
        }
    }

    #[test]
    fn full_k_is_global_majority() {
        assert_eq!(knn_predict(&five(), &[0.0, 0.0], 5).unwrap(), 1);
    }

    #[test]
    fn hand_built_k3() {
        // distances from (0.4, 0.4): p0 .566, p1 .721, p2 .721, then far points
        assert_eq!(knn_predict(&five(), &[0.4, 0.4], 3).unwrap(), 0);
        // from (0.0, 3.0): p2 2.0, p0 3.0, p1 3.16 -> votes 1,0,0
        assert_eq!(knn_predict(&five(), &[0.0, 3.0], 3).unwrap(), 0);
        // from (4, 4): p3 1.41, p4 2.24, p2 5.0
        assert_eq!(knn_predict(&five(), &[4.0, 4.0], 3).unwrap(), 1);
    }

    #[test]
    fn invalid_k() {
        assert!(knn_predict(&five(), &[0.0, 0.0], 0).is_err());
        assert!(knn_predict(&five(), &[0.0, 0.0], 6).is_err());
    }
}
