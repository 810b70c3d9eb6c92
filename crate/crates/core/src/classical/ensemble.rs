use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::logistic::{fit_logistic, Logistic, LogisticParams};
use super::model::{fit_classifier, ClassifierSpec, Model};
use super::{argmax_f64, Classifier, FeatureSet};
use crate::{Error, Result, Scalar};

pub(crate) fn vote_counts(votes: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes.max(votes.iter().map(|&v| v + 1).max().unwrap_or(0))];
    for &v in votes {
        counts[v] += 1;
    }
    counts
}

/// Modal label; ties go to the lowest id. `None` on empty input.
pub fn majority_vote(votes: &[usize]) -> Option<usize> {
    if votes.is_empty() {
        return None;
    }
    let counts = vote_counts(votes, 0);
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Some(best)
}

/// Hard-voting committee.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee<T> {
    pub members: Vec<Model<T>>,
    pub n_classes: usize,
}

impl<T: Scalar> Classifier<T> for Committee<T> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        let votes: Vec<usize> = self.members.iter().map(|m| m.predict(x)).collect();
        let counts = vote_counts(&votes, self.n_classes);
        counts.iter().map(|&c| c as f64 / votes.len() as f64).collect()
    }

    fn predict(&self, x: &[T]) -> usize {
        let votes: Vec<usize> = self.members.iter().map(|m| m.predict(x)).collect();
        majority_vote(&votes).unwrap_or(0)
    }
}

/// Seed for ensemble member `i`.
pub(crate) fn member_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn fit_committee<T: Scalar>(data: &FeatureSet<T>, members: &[ClassifierSpec], seed: u64) -> Result<Committee<T>> {
    if members.len() < 2 {
        return Err(Error::Config("a committee needs at least two members".into()));
    }
    let members = members
        .iter()
        .enumerate()
        .map(|(i, s)| fit_classifier(s, data, member_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Committee {
        members,
        n_classes: data.n_classes(),
    })
}

/// Fold id per sample: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            out[i] = j % folds;
        }
    }
    out
}

/// Level-0 learners plus a logistic meta-learner over their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Stacking<T> {
    pub base: Vec<Model<T>>,
    pub meta: Logistic,
    pub n_classes: usize,
}

impl<T: Scalar> Stacking<T> {
    /// Concatenated base probabilities, `n_base * n_classes` wide.
    pub fn meta_features(&self, x: &[T]) -> Vec<f64> {
        self.base.iter().flat_map(|m| m.predict_proba(x)).collect()
    }
}

pub fn fit_stacking<T: Scalar>(
    data: &FeatureSet<T>,
    base: &[ClassifierSpec],
    meta: &LogisticParams,
    folds: usize,
    seed: u64,
) -> Result<Stacking<T>> {
    if base.is_empty() {
        return Err(Error::Config("stacking needs at least one base learner".into()));
    }
    if folds < 2 {
        return Err(Error::Config(format!("stacking needs at least 2 folds, got {folds}")));
    }
    let k = data.n_classes();
    let present: Vec<bool> = data.class_counts().iter().map(|&c| c > 0).collect();
    let fold_of = stratified_folds(data.labels(), k, folds, seed);
    let width = base.len() * k;
    let mut meta_x = vec![vec![0.0; width]; data.len()];
    for f in 0..folds {
        let (held, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| fold_of[i] == f);
        if held.is_empty() {
            continue;
        }
        let part = data.subset(&train);
        let counts = part.class_counts();
        if let Some(c) = (0..k).find(|&c| present[c] && counts[c] == 0) {
            return Err(Error::Fit(format!("class {c} missing from the training part of fold {f}")));
        }
        for (b, spec) in base.iter().enumerate() {
            let model = fit_classifier(spec, &part, member_seed(seed, b))?;
            for &i in &held {
                meta_x[i][b * k..(b + 1) * k].copy_from_slice(&model.predict_proba(data.row(i)));
            }
        }
    }
    let meta_set = FeatureSet::from_rows(&meta_x, data.labels().to_vec(), k)?;
    let meta = fit_logistic(&meta_set, meta)?;
    let base = base
        .iter()
        .enumerate()
        .map(|(b, spec)| fit_classifier(spec, data, member_seed(seed, b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Stacking { base, meta, n_classes: k })
}

impl<T: Scalar> Classifier<T> for Stacking<T> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        Classifier::<f64>::predict_proba(&self.meta, &self.meta_features(x))
    }

    fn predict(&self, x: &[T]) -> usize {
        argmax_f64(&Classifier::<T>::predict_proba(self, x))
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::classical::tree::TreeParams;

    #[test]
    fn votes() {
        assert_eq!(majority_vote(&[3]), Some(3));
        assert_eq!(majority_vote(&[2, 5, 2]), Some(2));
        assert_eq!(majority_vote(&[5, 2]), Some(2));
        assert_eq!(majority_vote(&[]), None);
    }

    #[test]
    fn odd_binary_votes_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let mut v: Vec<usize> = (0..7).map(|_| rng.gen_range(0..2) * 3).collect();
            let m = majority_vote(&v);
            v.shuffle(&mut rng);
            assert_eq!(majority_vote(&v), m);
        }
    }

    fn blobs(n: usize, seed: u64) -> FeatureSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 3;
            rows.push(vec![c as f64 * 1.5 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            labels.push(c);
        }
        FeatureSet::from_rows(&rows, labels, 3).unwrap()
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let f = stratified_folds(&labels, 3, 5, 1);
        for fold in 0..5 {
            for c in 0..3 {
                assert_eq!((0..30).filter(|&i| f[i] == fold && labels[i] == c).count(), 2);
            }
        }
    }

    #[test]
    fn single_base_stack_tracks_base() {
        let train = blobs(150, 1);
        let test = blobs(300, 2);
        let spec = ClassifierSpec::NaiveBayes;
        let base = fit_classifier::<f64>(&spec, &train, 0).unwrap();
        let stack = fit_stacking(&train, &[spec], &LogisticParams { iterations: 3000, ..Default::default() }, 5, 0).unwrap();
        let acc = |m: &dyn Classifier<f64>| {
            (0..test.len()).filter(|&i| m.predict(test.row(i)) == test.label(i)).count() as f64 / test.len() as f64
        };
        assert!((acc(&base) - acc(&stack)).abs() <= 0.01, "{} vs {}", acc(&base), acc(&stack));
        assert_eq!(stack.meta_features(test.row(0)).len(), 3);
    }

    #[test]
    fn stack_width_and_determinism() {
        let d = blobs(60, 3);
        let specs = [ClassifierSpec::NaiveBayes, ClassifierSpec::DecisionTree(TreeParams::default())];
        let a = fit_stacking(&d, &specs, &LogisticParams::default(), 3, 7).unwrap();
        let b = fit_stacking(&d, &specs, &LogisticParams::default(), 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta_features(d.row(0)).len(), 2 * 3);
    }

    #[test]
    fn missing_class_in_fold() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let d = FeatureSet::from_rows(&rows, vec![0, 0, 0, 1, 1, 1, 2], 3).unwrap();
        let r = fit_stacking(&d, &[ClassifierSpec::DecisionTree(TreeParams::default())], &LogisticParams::default(), 2, 0);
        assert!(matches!(r, Err(Error::Fit(_))));
    }
}
