//! CART decision tree with Gini impurity.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_f64, Classifier, FeatureSet};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { histogram: Vec<usize> },
}

/// How many features a split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            MaxFeatures::All => dim,
            MaxFeatures::Sqrt => (dim as f64).sqrt().floor() as usize,
            MaxFeatures::Count(n) => n,
        };
        k.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

/// Nodes in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<TreeNode<T>>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    /// Weighted Gini impurity of the two children.
    pub impurity: f64,
    pub n_left: usize,
}

/// `sum(c^2) / n` for each side, kept as an exact fraction so that equal
/// impurities compare equal regardless of rounding.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Self {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn better_than(self, other: Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

fn gini_weighted(left: &[usize], right: &[usize]) -> f64 {
    let g = |h: &[usize]| {
        let n: usize = h.iter().sum();
        if n == 0 {
            return 0.0;
        }
        1.0 - h.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
    };
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    (nl as f64 * g(left) + nr as f64 * g(right)) / (nl + nr) as f64
}

fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let m = a + (b - a) / T::of(2.0);
    if m >= b {
        a
    } else {
        m
    }
}

/// Best Gini split of `indices` over `features` (scanned in the given order;
/// pass them ascending for the lowest-feature tie rule). Thresholds are
/// midpoints between consecutive distinct values, lowest wins on ties.
pub fn best_split<T: Scalar>(
    data: &FeatureSet<T>,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let k = data.n_classes();
    let n = indices.len();
    let mut total = vec![0usize; k];
    for &i in indices {
        total[data.label(i)] += 1;
    }
    let mut best: Option<(Score, SplitChoice<T>)> = None;
    let mut order = indices.to_vec();
    let mut left = vec![0usize; k];
    for &f in features {
        order.sort_by(|&a, &b| data.row(a)[f].partial_cmp(&data.row(b)[f]).unwrap().then(a.cmp(&b)));
        left.iter_mut().for_each(|c| *c = 0);
        let (mut sq_left, mut sq_right): (u128, u128) = (0, total.iter().map(|&c| (c * c) as u128).sum());
        for pos in 0..n - 1 {
            let c = data.label(order[pos]);
            let (l, r) = (left[c] as u128, (total[c] - left[c]) as u128);
            sq_left += 2 * l + 1;
            sq_right -= 2 * r - 1;
            left[c] += 1;
            let (a, b) = (data.row(order[pos])[f], data.row(order[pos + 1])[f]);
            let n_left = pos + 1;
            if a == b || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let score = Score::new(sq_left, n_left as u128, sq_right, (n - n_left) as u128);
            if best.as_ref().is_none_or(|(s, _)| score.better_than(*s)) {
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                best = Some((
                    score,
                    SplitChoice {
                        feature: f,
                        threshold: midpoint(a, b),
                        impurity: gini_weighted(&left, &right),
                        n_left,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Fits a tree on the rows in `indices` (repeats allowed, as in bootstrap
/// samples). `rng` draws the per-split feature subset when
/// `max_features` is not `All`.
pub(crate) fn fit_tree_on<T: Scalar>(
    data: &FeatureSet<T>,
    indices: &[usize],
    params: &TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree<T> {
    let k = data.n_classes();
    let dim = data.dim();
    let n_feat = params.max_features.resolve(dim);
    let mut nodes = Vec::new();
    // (node slot, indices, depth)
    let mut stack = vec![(0usize, indices.to_vec(), 0usize)];
    nodes.push(TreeNode::Leaf { histogram: vec![] });
    while let Some((slot, idx, depth)) = stack.pop() {
        let mut hist = vec![0usize; k];
        for &i in &idx {
            hist[data.label(i)] += 1;
        }
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let size_ok = idx.len() >= 2 * params.min_leaf.max(1);
        let split = if !pure && depth_ok && size_ok && dim > 0 {
            let features: Vec<usize> = match (&mut rng, n_feat < dim) {
                (Some(r), true) => {
                    let mut f = sample(*r, dim, n_feat).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..dim).collect(),
            };
            best_split(data, &idx, &features, params.min_leaf.max(1))
        } else {
            None
        };
        match split {
            None => nodes[slot] = TreeNode::Leaf { histogram: hist },
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| data.row(i)[s.feature] <= s.threshold);
                let (ls, rs) = (nodes.len(), nodes.len() + 1);
                nodes.push(TreeNode::Leaf { histogram: vec![] });
                nodes.push(TreeNode::Leaf { histogram: vec![] });
                nodes[slot] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: ls,
                    right: rs,
                };
                stack.push((rs, r, depth + 1));
                stack.push((ls, l, depth + 1));
            }
        }
    }
    DecisionTree { nodes, n_classes: k }
}

/// CART on every row of `data`, considering all features at each split.
pub fn fit_tree<T: Scalar>(data: &FeatureSet<T>, max_depth: Option<usize>, min_leaf: usize) -> DecisionTree<T> {
    let all: Vec<usize> = (0..data.len()).collect();
    let params = TreeParams {
        max_depth,
        min_leaf,
        max_features: MaxFeatures::All,
    };
    fit_tree_on(data, &all, &params, None)
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf_histogram(&self, x: &[T]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { histogram } => return histogram,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[TreeNode<T>], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

impl<T: Scalar> Classifier<T> for DecisionTree<T> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        let h = self.leaf_histogram(x);
        let n: usize = h.iter().sum();
        h.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
    }

    fn predict(&self, x: &[T]) -> usize {
        argmax_f64(&self.predict_proba(x))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    fn set(rows: &[&[f64]], labels: &[usize], k: usize) -> FeatureSet<f64> {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        FeatureSet::from_rows(&rows, labels.to_vec(), k).unwrap()
    }

    #[test]
    fn separable_pair() {
        let d = set(&[&[0.0], &[1.0]], &[0, 1], 2);
        let t = fit_tree(&d, None, 1);
        assert_eq!(t.nodes.len(), 3);
        match t.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 0.5)),
            _ => panic!(),
        }
        assert_eq!(t.leaf_histogram(&[0.0]), &[1, 0]);
        assert_eq!(t.leaf_histogram(&[1.0]), &[0, 1]);
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let d = set(&[&[0.0], &[3.0], &[5.0]], &[1, 1, 1], 2);
        let t = fit_tree(&d, None, 1);
        assert_eq!(t.nodes, vec![TreeNode::Leaf { histogram: vec![0, 3] }]);
    }

    #[test]
    fn depth_and_min_leaf_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let labels: Vec<usize> = (0..60).map(|_| rng.gen_range(0..3)).collect();
        let d = FeatureSet::from_rows(&rows, labels, 3).unwrap();
        assert!(fit_tree(&d, Some(2), 1).depth() <= 2);
        let t = fit_tree(&d, None, 5);
        for node in &t.nodes {
            if let TreeNode::Leaf { histogram } = node {
                assert!(histogram.iter().sum::<usize>() >= 5);
            }
        }
        // unlimited depth memorizes distinct points
        let full = fit_tree(&d, None, 1);
        let acc = (0..d.len()).filter(|&i| full.predict(d.row(i)) == d.label(i)).count();
        assert_eq!(acc, d.len());
    }

    #[test]
    fn ties_prefer_lowest_feature_and_threshold() {
        // both features separate identically
        let d = set(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]], &[0, 0, 1, 1], 2);
        let s = best_split(&d, &[0, 1, 2, 3], &[0, 1], 1).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        // two equally good thresholds: 0 | 1 2 | 3 with labels a b b a
        let d = set(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[0, 1, 1, 0], 2);
        let s = best_split(&d, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn root_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen_range(0..6) as f64, rng.gen()]).collect();
            let labels: Vec<usize> = (0..20).map(|_| rng.gen_range(0..2)).collect();
            let d = FeatureSet::from_rows(&rows, labels.clone(), 2).unwrap();
            let t = fit_tree(&d, Some(2), 1);
            let mut best = f64::INFINITY;
            for f in 0..2 {
                for r in &rows {
                    let thr = r[f];
                    let mut hl = [0usize; 2];
                    let mut hr = [0usize; 2];
                    for (x, &y) in rows.iter().zip(&labels) {
                        if x[f] <= thr { hl[y] += 1 } else { hr[y] += 1 }
                    }
                    if hr.iter().sum::<usize>() > 0 {
                        best = best.min(gini_weighted(&hl, &hr));
                    }
                }
            }
            let all: Vec<usize> = (0..20).collect();
            let s = best_split(&d, &all, &[0, 1], 1).unwrap();
            assert!((s.impurity - best).abs() < 1e-12);
            assert!(matches!(t.nodes[0], TreeNode::Split { feature, .. } if feature == s.feature));
        }
    }
}
