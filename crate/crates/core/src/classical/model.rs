use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::bayes::{fit_gnb, GaussianNb};
use super::ensemble::{fit_committee, fit_stacking, Committee, Stacking};
use super::forest::{fit_forest, ForestParams, RandomForest};
use super::knn::{Knn, DEFAULT_K};
use super::logistic::{fit_logistic, Logistic, LogisticParams};
use super::svm::{fit_linear_svm_ovr, LinearSvm, Standardizer, SvmParams};
use super::tree::{fit_tree_on, DecisionTree, TreeNode, TreeParams};
use super::{Classifier, FeatureSet};
use crate::nn::{decode_serm, encode_serm, RawTensor};
use crate::{Error, Result, Scalar};

/// Declarative description of a classical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    NaiveBayes,
    LinearSvm(SvmParams),
    Knn { k: usize },
    Logistic(LogisticParams),
    MajorityVote { members: Vec<ClassifierSpec> },
    Stacking {
        base: Vec<ClassifierSpec>,
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default)]
        meta: LogisticParams,
    },
}

fn default_folds() -> usize {
    5
}

/// Column names of the classical result tables, in table order.
pub const TABLE_METHODS: [&str; 6] = ["SVM", "RF", "DT", "NB", "MV", "STCK"];

impl ClassifierSpec {
    /// Default configuration behind a table column name (case-insensitive).
    /// `KNN` and `LR` are accepted in addition to the table columns.
    pub fn preset(name: &str) -> Result<Self> {
        let committee = || {
            vec![
                ClassifierSpec::LinearSvm(SvmParams::default()),
                ClassifierSpec::RandomForest(ForestParams::default()),
                ClassifierSpec::DecisionTree(TreeParams::default()),
                ClassifierSpec::NaiveBayes,
            ]
        };
        Ok(match name.to_ascii_uppercase().as_str() {
            "SVM" => ClassifierSpec::LinearSvm(SvmParams::default()),
            "RF" => ClassifierSpec::RandomForest(ForestParams::default()),
            "DT" => ClassifierSpec::DecisionTree(TreeParams::default()),
            "NB" => ClassifierSpec::NaiveBayes,
            "KNN" => ClassifierSpec::Knn { k: DEFAULT_K },
            "LR" => ClassifierSpec::Logistic(LogisticParams::default()),
            "MV" => ClassifierSpec::MajorityVote { members: committee() },
            "STCK" => ClassifierSpec::Stacking {
                base: committee(),
                folds: default_folds(),
                meta: LogisticParams::default(),
            },
            other => return Err(Error::Config(format!("unknown classical method {other:?}"))),
        })
    }

    /// Column name for this kind of model, whatever its parameters.
    pub fn short_name(&self) -> &'static str {
        match self {
            ClassifierSpec::DecisionTree(_) => "DT",
            ClassifierSpec::RandomForest(_) => "RF",
            ClassifierSpec::NaiveBayes => "NB",
            ClassifierSpec::LinearSvm(_) => "SVM",
            ClassifierSpec::Knn { .. } => "KNN",
            ClassifierSpec::Logistic(_) => "LR",
            ClassifierSpec::MajorityVote { .. } => "MV",
            ClassifierSpec::Stacking { .. } => "STCK",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Tree(DecisionTree<T>),
    Forest(RandomForest<T>),
    NaiveBayes(GaussianNb),
    Svm(LinearSvm),
    Knn(Knn<T>),
    Logistic(Logistic),
    Vote(Committee<T>),
    Stack(Stacking<T>),
}

pub fn fit_classifier<T: Scalar>(spec: &ClassifierSpec, data: &FeatureSet<T>, seed: u64) -> Result<Model<T>> {
    if data.is_empty() {
        return Err(Error::Fit("no training samples".into()));
    }
    Ok(match spec {
        ClassifierSpec::DecisionTree(p) => {
            let all: Vec<usize> = (0..data.len()).collect();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            Model::Tree(fit_tree_on(data, &all, p, Some(&mut rng)))
        }
        ClassifierSpec::RandomForest(p) => Model::Forest(fit_forest(data, p, seed)?),
        ClassifierSpec::NaiveBayes => Model::NaiveBayes(fit_gnb(data)?),
        ClassifierSpec::LinearSvm(p) => Model::Svm(fit_linear_svm_ovr(data, p, seed)?),
        ClassifierSpec::Knn { k } => Model::Knn(Knn::new(data.clone(), (*k).min(data.len()))?),
        ClassifierSpec::Logistic(p) => Model::Logistic(fit_logistic(data, p)?),
        ClassifierSpec::MajorityVote { members } => Model::Vote(fit_committee(data, members, seed)?),
        ClassifierSpec::Stacking { base, folds, meta } => Model::Stack(fit_stacking(data, base, meta, *folds, seed)?),
    })
}

impl<T: Scalar> Classifier<T> for Model<T> {
    fn n_classes(&self) -> usize {
        match self {
            Model::Tree(m) => m.n_classes(),
            Model::Forest(m) => m.n_classes(),
            Model::NaiveBayes(m) => Classifier::<T>::n_classes(m),
            Model::Svm(m) => Classifier::<T>::n_classes(m),
            Model::Knn(m) => m.n_classes(),
            Model::Logistic(m) => Classifier::<T>::n_classes(m),
            Model::Vote(m) => m.n_classes(),
            Model::Stack(m) => m.n_classes(),
        }
    }

    fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        match self {
            Model::Tree(m) => m.predict_proba(x),
            Model::Forest(m) => m.predict_proba(x),
            Model::NaiveBayes(m) => m.predict_proba(x),
            Model::Svm(m) => m.predict_proba(x),
            Model::Knn(m) => m.predict_proba(x),
            Model::Logistic(m) => m.predict_proba(x),
            Model::Vote(m) => m.predict_proba(x),
            Model::Stack(m) => m.predict_proba(x),
        }
    }

    fn predict(&self, x: &[T]) -> usize {
        match self {
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::NaiveBayes(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Logistic(m) => m.predict(x),
            Model::Vote(m) => m.predict(x),
            Model::Stack(m) => m.predict(x),
        }
    }
}

// ------------------------------------------------------------ persistence

fn rows_tensor(name: String, rows: &[Vec<f64>]) -> RawTensor {
    let cols = rows.first().map_or(0, Vec::len);
    RawTensor {
        name,
        shape: vec![rows.len(), cols],
        data: rows.iter().flatten().map(|&v| v as f32).collect(),
    }
}

fn vec_tensor(name: String, v: impl IntoIterator<Item = f64>) -> RawTensor {
    let data: Vec<f32> = v.into_iter().map(|x| x as f32).collect();
    RawTensor {
        name,
        shape: vec![data.len()],
        data,
    }
}

struct Store {
    tensors: BTreeMap<String, RawTensor>,
}

impl Store {
    fn get(&self, name: &str) -> Result<&RawTensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Parse(format!("model file lacks tensor {name}")))
    }

    fn rows(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let t = self.get(name)?;
        if t.shape.len() != 2 {
            return Err(Error::shape(name.to_string(), format!("expected a matrix, got {:?}", t.shape)));
        }
        Ok(t.data
            .chunks(t.shape[1].max(1))
            .take(t.shape[0])
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect())
    }

    fn vec(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.get(name)?.data.iter().map(|&v| v as f64).collect())
    }
}

fn usize_of(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|n| n as usize)
        .ok_or_else(|| Error::Parse(format!("model header lacks {key}")))
}

fn tree_parts<T: Scalar>(t: &DecisionTree<T>, prefix: &str, out: &mut Vec<RawTensor>) -> Value {
    let n = t.nodes.len();
    let (mut feat, mut thr, mut left, mut right) = (vec![-1.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut hist = vec![vec![0.0; t.n_classes]; n];
    for (i, node) in t.nodes.iter().enumerate() {
        match node {
            TreeNode::Split {
                feature,
                threshold,
                left: l,
                right: r,
            } => {
                feat[i] = *feature as f64;
                thr[i] = threshold.to_f64_lossy();
                left[i] = *l as f64;
                right[i] = *r as f64;
            }
            TreeNode::Leaf { histogram } => {
                for (h, &c) in hist[i].iter_mut().zip(histogram) {
                    *h = c as f64;
                }
            }
        }
    }
    out.push(vec_tensor(format!("{prefix}feature"), feat));
    out.push(vec_tensor(format!("{prefix}threshold"), thr));
    out.push(vec_tensor(format!("{prefix}left"), left));
    out.push(vec_tensor(format!("{prefix}right"), right));
    out.push(rows_tensor(format!("{prefix}histogram"), &hist));
    json!({ "nodes": n })
}

fn tree_from<T: Scalar>(s: &Store, prefix: &str, n_classes: usize) -> Result<DecisionTree<T>> {
    let feat = s.vec(&format!("{prefix}feature"))?;
    let thr = s.get(&format!("{prefix}threshold"))?;
    let left = s.vec(&format!("{prefix}left"))?;
    let right = s.vec(&format!("{prefix}right"))?;
    let hist = s.rows(&format!("{prefix}histogram"))?;
    let n = feat.len();
    if [thr.data.len(), left.len(), right.len(), hist.len()].iter().any(|&l| l != n) {
        return Err(Error::Parse(format!("inconsistent tree tensors under {prefix}")));
    }
    let nodes = (0..n)
        .map(|i| {
            if feat[i] < 0.0 {
                Ok(TreeNode::Leaf {
                    histogram: hist[i].iter().map(|&c| c as usize).collect(),
                })
            } else {
                let (l, r) = (left[i] as usize, right[i] as usize);
                if l >= n || r >= n || l <= i || r <= i {
                    return Err(Error::Parse(format!("bad child index in tree {prefix}")));
                }
                Ok(TreeNode::Split {
                    feature: feat[i] as usize,
                    threshold: T::of(thr.data[i] as f64),
                    left: l,
                    right: r,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionTree { nodes, n_classes })
}

impl<T: Scalar> Model<T> {
    fn to_parts(&self, prefix: &str, out: &mut Vec<RawTensor>) -> Value {
        match self {
            Model::Tree(t) => tree_parts(t, prefix, out),
            Model::Forest(f) => {
                for (i, t) in f.trees.iter().enumerate() {
                    tree_parts(t, &format!("{prefix}tree{i}/"), out);
                }
                json!({ "trees": f.trees.len() })
            }
            Model::NaiveBayes(m) => {
                out.push(rows_tensor(format!("{prefix}means"), &m.means));
                out.push(rows_tensor(format!("{prefix}variances"), &m.variances));
                out.push(vec_tensor(format!("{prefix}log_priors"), m.log_priors.iter().copied()));
                json!({})
            }
            Model::Svm(m) => {
                out.push(vec_tensor(format!("{prefix}mean"), m.standardizer.mean.iter().copied()));
                out.push(vec_tensor(format!("{prefix}scale"), m.standardizer.scale.iter().copied()));
                out.push(rows_tensor(format!("{prefix}weights"), &m.weights));
                json!({})
            }
            Model::Knn(m) => {
                let rows: Vec<Vec<f64>> = (0..m.train.len())
                    .map(|i| m.train.row(i).iter().map(|v| v.to_f64_lossy()).collect())
                    .collect();
                out.push(rows_tensor(format!("{prefix}x"), &rows));
                out.push(vec_tensor(format!("{prefix}y"), m.train.labels().iter().map(|&l| l as f64)));
                json!({ "k": m.k, "dim": m.train.dim() })
            }
            Model::Logistic(m) => {
                out.push(rows_tensor(format!("{prefix}weights"), &m.weights));
                json!({})
            }
            Model::Vote(c) => {
                let members: Vec<Value> = c
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.to_parts(&format!("{prefix}member{i}/"), out))
                    .collect();
                json!({ "members": members })
            }
            Model::Stack(s) => {
                let base: Vec<Value> = s
                    .base
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.to_parts(&format!("{prefix}base{i}/"), out))
                    .collect();
                out.push(rows_tensor(format!("{prefix}meta/weights"), &s.meta.weights));
                json!({ "base": base })
            }
        }
    }

    fn from_parts(spec: &ClassifierSpec, layout: &Value, s: &Store, prefix: &str, k: usize) -> Result<Self> {
        Ok(match spec {
            ClassifierSpec::DecisionTree(_) => Model::Tree(tree_from(s, prefix, k)?),
            ClassifierSpec::RandomForest(_) => {
                let n = usize_of(layout, "trees")?;
                let trees = (0..n)
                    .map(|i| tree_from(s, &format!("{prefix}tree{i}/"), k))
                    .collect::<Result<Vec<_>>>()?;
                Model::Forest(RandomForest { trees, n_classes: k })
            }
            ClassifierSpec::NaiveBayes => Model::NaiveBayes(GaussianNb {
                means: s.rows(&format!("{prefix}means"))?,
                variances: s.rows(&format!("{prefix}variances"))?,
                log_priors: s.vec(&format!("{prefix}log_priors"))?,
            }),
            ClassifierSpec::LinearSvm(_) => Model::Svm(LinearSvm {
                standardizer: Standardizer {
                    mean: s.vec(&format!("{prefix}mean"))?,
                    scale: s.vec(&format!("{prefix}scale"))?,
                },
                weights: s.rows(&format!("{prefix}weights"))?,
            }),
            ClassifierSpec::Knn { .. } => {
                let dim = usize_of(layout, "dim")?;
                let x = s.get(&format!("{prefix}x"))?;
                let y = s.vec(&format!("{prefix}y"))?;
                let values = x.data.iter().map(|&v| T::of(v as f64)).collect();
                let train = FeatureSet::new(values, dim, y.iter().map(|&l| l as usize).collect(), k)?;
                Model::Knn(Knn::new(train, usize_of(layout, "k")?)?)
            }
            ClassifierSpec::Logistic(_) => Model::Logistic(Logistic {
                weights: s.rows(&format!("{prefix}weights"))?,
            }),
            ClassifierSpec::MajorityVote { members } => {
                let layouts = layout.get("members").and_then(Value::as_array).cloned().unwrap_or_default();
                if layouts.len() != members.len() {
                    return Err(Error::Parse("committee layout does not match its spec".into()));
                }
                let members = members
                    .iter()
                    .zip(&layouts)
                    .enumerate()
                    .map(|(i, (sp, l))| Model::from_parts(sp, l, s, &format!("{prefix}member{i}/"), k))
                    .collect::<Result<Vec<_>>>()?;
                Model::Vote(Committee { members, n_classes: k })
            }
            ClassifierSpec::Stacking { base, .. } => {
                let layouts = layout.get("base").and_then(Value::as_array).cloned().unwrap_or_default();
                if layouts.len() != base.len() {
                    return Err(Error::Parse("stacking layout does not match its spec".into()));
                }
                let base = base
                    .iter()
                    .zip(&layouts)
                    .enumerate()
                    .map(|(i, (sp, l))| Model::from_parts(sp, l, s, &format!("{prefix}base{i}/"), k))
                    .collect::<Result<Vec<_>>>()?;
                let meta = Logistic {
                    weights: s.rows(&format!("{prefix}meta/weights"))?,
                };
                Model::Stack(Stacking { base, meta, n_classes: k })
            }
        })
    }
}

/// A fitted classical model with the metadata needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel<T> {
    pub spec: ClassifierSpec,
    pub model: Model<T>,
    pub dim: usize,
    /// Class names by id.
    pub labels: Vec<String>,
    /// Feature frontend the model was fitted on ("mfcc" or "logmel").
    pub frontend: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassicalHeader {
    model: String,
    spec: ClassifierSpec,
    frontend: String,
    labels: Vec<String>,
    dim: usize,
    n_classes: usize,
    layout: Value,
}

const CLASSICAL_MODEL: &str = "classical";

impl<T: Scalar> ClassicalModel<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let layout = self.model.to_parts("", &mut tensors);
        let header = ClassicalHeader {
            model: CLASSICAL_MODEL.into(),
            spec: self.spec.clone(),
            frontend: self.frontend.clone(),
            labels: self.labels.clone(),
            dim: self.dim,
            n_classes: self.model.n_classes(),
            layout,
        };
        encode_serm(&header, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, tensors): (ClassicalHeader, Vec<RawTensor>) = decode_serm(bytes)?;
        if h.model != CLASSICAL_MODEL {
            return Err(Error::UnsupportedFormat(format!("model kind {:?}", h.model)));
        }
        let store = Store {
            tensors: tensors.into_iter().map(|t| (t.name.clone(), t)).collect(),
        };
        let model = Model::from_parts(&h.spec, &h.layout, &store, "", h.n_classes)?;
        Ok(Self {
            spec: h.spec,
            model,
            dim: h.dim,
            labels: h.labels,
            frontend: h.frontend,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::shape(
                "classifier",
                format!("expected {} features, got {}", self.dim, x.len()),
            ));
        }
        Ok(self.model.predict(x))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn data() -> FeatureSet<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            rows.push((0..5).map(|j| (c * (j % 2)) as f32 + rng.gen_range(-0.8..0.8)).collect::<Vec<f32>>());
            labels.push(c);
        }
        FeatureSet::from_rows(&rows, labels, 3).unwrap()
    }

    #[test]
    fn every_preset_roundtrips_through_bytes() {
        let d = data();
        for name in TABLE_METHODS.iter().chain(&["KNN", "LR"]) {
            let spec = ClassifierSpec::preset(name).unwrap();
            assert_eq!(spec.short_name(), *name);
            let spec = match spec {
                ClassifierSpec::RandomForest(p) => ClassifierSpec::RandomForest(ForestParams { n_trees: 5, ..p }),
                s => s,
            };
            let model = fit_classifier(&spec, &d, 1).unwrap();
            let cm = ClassicalModel {
                spec,
                model,
                dim: 5,
                labels: vec!["a".into(), "b".into(), "c".into()],
                frontend: "mfcc".into(),
            };
            let bytes = cm.to_bytes().unwrap();
            let back = ClassicalModel::<f32>::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes().unwrap(), bytes, "{name}");
            for i in 0..d.len() {
                let p = back.predict(d.row(i)).unwrap();
                assert!(p < 3);
            }
        }
    }

    #[test]
    fn predictions_stay_in_label_set() {
        let d = data();
        let m = fit_classifier(&ClassifierSpec::preset("dt").unwrap(), &d, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let q: Vec<f32> = (0..5).map(|_| rng.gen_range(-10.0..10.0)).collect();
            assert!(m.predict(&q) < 3);
        }
    }

    #[test]
    fn tree_beats_majority_baseline() {
        let d = data();
        let m = fit_classifier(&ClassifierSpec::preset("DT").unwrap(), &d, 0).unwrap();
        let acc = (0..d.len()).filter(|&i| m.predict(d.row(i)) == d.label(i)).count();
        let majority = *d.class_counts().iter().max().unwrap();
        assert!(acc >= majority);
    }

    #[test]
    fn spec_json_shape() {
        let s = ClassifierSpec::preset("STCK").unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.starts_with(r#"{"kind":"stacking""#));
        assert_eq!(serde_json::from_str::<ClassifierSpec>(&text).unwrap(), s);
        assert!(ClassifierSpec::preset("XGB").is_err());
    }
}
