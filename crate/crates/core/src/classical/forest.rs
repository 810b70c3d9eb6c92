use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::vote_counts;
use super::tree::{fit_tree_on, DecisionTree, MaxFeatures, TreeParams};
use super::{argmax_f64, Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    pub trees: Vec<DecisionTree<T>>,
    pub n_classes: usize,
}

/// Tree `i` draws from ChaCha8 stream `i` of `seed`, so the forest does not
/// depend on how trees are scheduled across threads.
pub fn fit_forest<T: Scalar>(data: &FeatureSet<T>, params: &ForestParams, seed: u64) -> Result<RandomForest<T>> {
    if params.n_trees == 0 {
        return Err(Error::Fit("forest needs at least one tree".into()));
    }
    let n = data.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: params.max_features,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(data, &idx, &tree_params, Some(&mut rng))
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_classes: data.n_classes(),
    })
}

impl<T: Scalar> Classifier<T> for RandomForest<T> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Fraction of trees voting for each class.
    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(x)).collect();
        let counts = vote_counts(&votes, self.n_classes);
        counts.iter().map(|&c| c as f64 / self.trees.len() as f64).collect()
    }

    fn predict(&self, x: &[T]) -> usize {
        argmax_f64(&self.predict_proba(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::tree::{fit_tree, TreeNode};

    fn noisy(seed: u64, n: usize) -> FeatureSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let score = x[0] + 0.8 * x[1] - 0.5 * x[2] + rng.gen_range(-0.6..0.6);
            labels.push(usize::from(score > 0.0));
            rows.push(x);
        }
        FeatureSet::from_rows(&rows, labels, 2).unwrap()
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let d = noisy(1, 50);
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::default()
        };
        let f = fit_forest(&d, &p, 9).unwrap();
        assert_eq!(f.trees[0], fit_tree(&d, None, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let d = noisy(2, 60);
        let p = ForestParams { n_trees: 7, ..ForestParams::default() };
        assert_eq!(fit_forest(&d, &p, 3).unwrap(), fit_forest(&d, &p, 3).unwrap());
        assert_ne!(fit_forest(&d, &p, 3).unwrap(), fit_forest(&d, &p, 4).unwrap());
    }

    #[test]
    fn three_tree_vote() {
        let leaf = |c: usize| DecisionTree {
            nodes: vec![TreeNode::<f64>::Leaf {
                histogram: if c == 0 { vec![1, 0] } else { vec![0, 1] },
            }],
            n_classes: 2,
        };
        let f = RandomForest {
            trees: vec![leaf(0), leaf(1), leaf(0)],
            n_classes: 2,
        };
        assert_eq!(f.predict(&[0.0]), 0);
    }

    #[test]
    fn more_trees_help_on_average() {
        let mut wins = 0;
        for s in 0..20 {
            let train = noisy(100 + s, 120);
            let test = noisy(200 + s, 200);
            let acc = |n_trees| {
                let f = fit_forest(&train, &ForestParams { n_trees, ..ForestParams::default() }, s).unwrap();
                (0..test.len()).filter(|&i| f.predict(test.row(i)) == test.label(i)).count()
            };
            if acc(25) >= acc(1) {
                wins += 1;
            }
        }
        assert!(wins >= 19, "{wins}/20");
    }
}
