use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig};
use super::loss::cross_entropy_loss;
use super::model::{backward, forward, init_parameters, Checkpoint, GradientEntry, Mode, RngState};
use super::{ArchConfig, Tensor};
use crate::{Error, Result, Scalar};

/// Preprocessed inputs `[N, ...]` with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub inputs: Tensor<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().is_empty() || inputs.batch() != labels.len() {
            return Err(Error::shape(
                "dataset",
                format!("{} labels for inputs {:?}", labels.len(), inputs.shape()),
            ));
        }
        Ok(Self { inputs, labels })
    }

    /// Stacks equally shaped samples.
    pub fn from_samples(samples: &[Vec<T>], sample_shape: &[usize], labels: Vec<usize>) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if let Some(bad) = samples.iter().find(|s| s.len() != per) {
            return Err(Error::shape(
                "dataset",
                format!("sample of {} values, expected {sample_shape:?}", bad.len()),
            ));
        }
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(sample_shape);
        Self::new(Tensor::from_vec(&shape, samples.concat())?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Cnn,
    Lstm,
    CnnLstm,
}

impl ModelFamily {
    pub fn default_epochs(self) -> usize {
        match self {
            ModelFamily::Cnn => 500,
            ModelFamily::Lstm => 80,
            ModelFamily::CnnLstm => 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_family(ModelFamily::Cnn, 0)
    }
}

impl TrainConfig {
    pub fn for_family(family: ModelFamily, seed: u64) -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            epochs: family.default_epochs(),
            batch_size: 8,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.epochs > 0
            && self.batch_size > 0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if positive {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Fraction of rows whose argmax matches the label.
pub fn accuracy<T: Scalar>(ckpt: &Checkpoint<T>, data: &Dataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let preds = ckpt.predict(&data.inputs)?;
    let hits = preds.iter().zip(&data.labels).filter(|(p, &l)| p.label == l).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Initializes from `cfg.seed` and trains for `cfg.epochs`.
pub fn train<T: Scalar>(
    arch: &ArchConfig,
    cfg: &TrainConfig,
    train_set: &Dataset<T>,
    valid_set: Option<&Dataset<T>>,
) -> Result<(Checkpoint<T>, History)> {
    let mut ckpt = init_parameters(arch, cfg.seed)?;
    let history = train_from(&mut ckpt, cfg, train_set, valid_set, |_| {})?;
    Ok((ckpt, history))
}

/// Continues training `ckpt`; `on_epoch` sees each record as it is produced.
pub fn train_from<T: Scalar>(
    ckpt: &mut Checkpoint<T>,
    cfg: &TrainConfig,
    train_set: &Dataset<T>,
    valid_set: Option<&Dataset<T>>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let n_classes = ckpt.arch.n_classes;
    if let Some(&bad) = train_set.labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Label(format!("label {bad} outside {n_classes} classes")));
    }
    let net = ckpt.network()?;
    let adam = cfg.adam();
    let mut rng = ckpt.rng.restore()?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let start_epoch = ckpt.optimizer.step as usize / train_set.len().div_ceil(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let x = train_set.inputs.gather_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| train_set.labels[i]).collect();
            let pass = forward(&net, &ckpt.params, &mut ckpt.buffers, &x, Mode::Train, &mut rng)?;
            let (loss, grad) = cross_entropy_loss(&pass.probs, &y)?;
            if !loss.is_finite() {
                return Err(Error::Fit(format!("non-finite loss at epoch {}", epoch + 1)));
            }
            loss_sum += loss * idx.len() as f64;
            let classes = pass.probs.last_dim();
            hits += pass
                .probs
                .data()
                .chunks_exact(classes)
                .zip(&y)
                .filter(|(row, &l)| super::model::argmax(row) == l)
                .count();
            let grads = backward(&net, &ckpt.params, &pass, &grad, GradientEntry::Logits, false)?;
            adam_step(ckpt, &grads.params, &adam)?;
        }
        let record = EpochRecord {
            epoch: start_epoch + epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: hits as f64 / train_set.len() as f64,
            valid_accuracy: valid_set.map(|v| accuracy(ckpt, v)).transpose()?,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    ckpt.rng = RngState::capture(&rng);
    Ok(history)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toy_arch() -> ArchConfig {
        ArchConfig::from_json(
            r#"{"schema_version":1,"name":"toy","input":"raw6s","raw_seconds":0.004,"n_classes":2,
            "layers":[{"type":"conv1d","filters":8,"kernel":5,"stride":2},{"type":"relu"},
            {"type":"conv1d","filters":8,"kernel":5,"stride":2},{"type":"relu"},
            {"type":"flatten"},{"type":"dense","units":16},{"type":"dense","units":2},{"type":"softmax"}]}"#,
        )
        .unwrap()
    }

    /// 16 clips, two frequencies with random phase.
    fn toy_set() -> Dataset<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let len = 64;
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..16 {
            let class = i % 2;
            let freq = if class == 0 { 0.1 } else { 0.35 };
            let phase: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
            samples.push((0..len).map(|t| (freq * t as f32 + phase).sin()).collect::<Vec<f32>>());
            labels.push(class);
        }
        Dataset::from_samples(&samples, &[len, 1], labels).unwrap()
    }

    #[test]
    fn overfits_toy_set() {
        let data = toy_set();
        let cfg = TrainConfig {
            epochs: 200,
            seed: 1,
            ..TrainConfig::default()
        };
        let (ckpt, history) = train(&toy_arch(), &cfg, &data, Some(&data)).unwrap();
        assert_eq!(history.len(), 200);
        assert_eq!(accuracy(&ckpt, &data).unwrap(), 1.0);
        // mean loss of consecutive 20-epoch windows after epoch 50 never rises
        let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
        let means: Vec<f64> = losses[50..].chunks(20).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
        for pair in means.windows(2) {
            assert!(pair[1] <= pair[0], "{means:?}");
        }
    }

    #[test]
    fn same_seed_same_loss() {
        let data = toy_set();
        let cfg = TrainConfig {
            epochs: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        let (a, ha) = train(&toy_arch(), &cfg, &data, None).unwrap();
        let (b, hb) = train(&toy_arch(), &cfg, &data, None).unwrap();
        assert_eq!(ha.final_loss(), hb.final_loss());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = Dataset::<f32>::new(Tensor::zeros(&[0, 64, 1]), vec![]).unwrap();
        let r = train(&toy_arch(), &TrainConfig::default(), &data, None);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn family_presets() {
        assert_eq!(TrainConfig::for_family(ModelFamily::Cnn, 0).epochs, 500);
        assert_eq!(TrainConfig::for_family(ModelFamily::Lstm, 0).epochs, 80);
        let c = TrainConfig::for_family(ModelFamily::CnnLstm, 0);
        assert_eq!((c.epochs, c.batch_size, c.learning_rate), (200, 8, 0.001));
        assert!(TrainConfig { batch_size: 0, ..c }.validate().is_err());
    }
}
