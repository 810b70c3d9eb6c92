use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use ser_core::audio::{DataSplit, DatasetManifest, SplitMode};
use ser_core::classical::{fit_classifier, ClassicalModel, Classifier, ClassifierSpec, FeatureSet};
use ser_core::eval::{ExperimentResult, Frontend, MethodFamily};
use ser_core::nn::{
    init_parameters, model_kind, train_from, ArchConfig, Dataset, LayerSpec, ModelFamily, TrainConfig,
};
use ser_core::{Checkpoint32, Waveform32};

use crate::config::{required, resolve_seed, user_error, EvalArgs, PredictArgs, TrainArgs};
use crate::data::{load_manifest, parse_frontend, write_atomic};

pub const DEFAULT_RATIO: f64 = 0.8;

/// Either kind of saved model, loaded in single precision.
pub enum AnyModel {
    Neural(Box<Checkpoint32>),
    Classical(Box<ClassicalModel<f32>>),
}

impl AnyModel {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match model_kind(bytes)?.as_str() {
            "neural" => Ok(AnyModel::Neural(Box::new(Checkpoint32::from_bytes(bytes)?))),
            "classical" => Ok(AnyModel::Classical(Box::new(ClassicalModel::from_bytes(bytes)?))),
            other => Err(user_error(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| user_error(format!("cannot read model {}: {e}", path.display())))?;
        Self::from_bytes(&bytes).with_context(|| format!("loading {}", path.display()))
    }

    pub fn labels(&self) -> &[String] {
        match self {
            AnyModel::Neural(c) => &c.labels,
            AnyModel::Classical(m) => &m.labels,
        }
    }

    pub fn frontend(&self) -> Result<Frontend> {
        match self {
            AnyModel::Neural(c) => Ok(Frontend::from_input_kind(c.arch.input)),
            AnyModel::Classical(m) => Ok(m.frontend.parse()?),
        }
    }

    pub fn method(&self) -> String {
        match self {
            AnyModel::Neural(c) => c.arch.name.clone(),
            AnyModel::Classical(m) => m.spec.short_name().to_string(),
        }
    }

    pub fn family(&self) -> MethodFamily {
        match self {
            AnyModel::Neural(_) => MethodFamily::Deep,
            AnyModel::Classical(_) => MethodFamily::Classical,
        }
    }

    fn input(&self, w: &Waveform32) -> Result<Vec<f32>> {
        let frontend = self.frontend()?;
        Ok(match self {
            AnyModel::Neural(c) => frontend.network_input(w, &c.arch)?,
            AnyModel::Classical(_) => frontend.feature_vector(w)?,
        })
    }

    /// `(class id, probabilities)` per input.
    pub fn predict(&self, inputs: &[Vec<f32>]) -> Result<Vec<(usize, Vec<f64>)>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        match self {
            AnyModel::Neural(c) => {
                let data = Dataset::from_samples(inputs, &c.arch.input_shape(), vec![0; inputs.len()])?;
                Ok(c.predict(&data.inputs)?
                    .into_iter()
                    .map(|p| (p.label, p.probs.iter().map(|&v| v as f64).collect()))
                    .collect())
            }
            AnyModel::Classical(m) => inputs
                .iter()
                .map(|x| Ok((m.predict(x)?, m.model.predict_proba(x))))
                .collect(),
        }
    }

    pub fn inputs(&self, manifest: &DatasetManifest) -> Result<Vec<Vec<f32>>> {
        load_inputs(manifest, |w| self.input(w))
    }
}

/// Loads every file of `manifest` and applies `f`, keeping manifest order.
pub fn load_inputs(
    manifest: &DatasetManifest,
    f: impl Fn(&Waveform32) -> Result<Vec<f32>> + Sync,
) -> Result<Vec<Vec<f32>>> {
    manifest
        .entries()
        .par_iter()
        .map(|e| {
            let w = Waveform32::load(&e.path)?;
            f(&w).with_context(|| format!("preparing {}", e.path.display()))
        })
        .collect()
}

/// Scores `model` on `test`; train and eval both go through here.
pub fn evaluate(model: &AnyModel, test: &DatasetManifest, dataset: &str, seed: u64) -> Result<ExperimentResult> {
    let inputs = model.inputs(test)?;
    let preds: Vec<usize> = model.predict(&inputs)?.into_iter().map(|(l, _)| l).collect();
    Ok(ExperimentResult::from_predictions(
        dataset,
        &model.method(),
        model.family(),
        model.frontend()?,
        model.labels(),
        &preds,
        &test.class_ids(),
        seed,
        0,
    )?)
}

/// File stem of the manifest, or its directory name for `manifest.csv`.
pub fn dataset_name(manifest: &Path) -> String {
    let stem = manifest.file_stem().map(|s| s.to_string_lossy().into_owned());
    match stem.as_deref() {
        Some("manifest") | None => manifest
            .canonicalize()
            .ok()
            .and_then(|p| p.parent().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into()),
        Some(s) => s.to_string(),
    }
}

/// A builtin topology name or an arch JSON file.
pub fn resolve_arch(spec: &str) -> Result<ArchConfig> {
    if let Some(arch) = ArchConfig::builtin(spec) {
        return Ok(arch);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(user_error(format!(
            "unknown arch {spec:?}: not one of cnn, lstm, cnn-lstm, cnn-small and not a file"
        )));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ArchConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
}

/// Training defaults follow the topology.
pub fn family_of(arch: &ArchConfig) -> ModelFamily {
    let has = |f: fn(&LayerSpec) -> bool| arch.layers.iter().any(f);
    match (has(|l| matches!(l, LayerSpec::Conv1d { .. })), has(|l| matches!(l, LayerSpec::Lstm { .. }))) {
        (true, true) => ModelFamily::CnnLstm,
        (false, true) => ModelFamily::Lstm,
        _ => ModelFamily::Cnn,
    }
}

fn parse_split(s: Option<&str>) -> Result<SplitMode> {
    Ok(s.map(str::parse).transpose()?.unwrap_or_default())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn train(args: TrainArgs, global_seed: Option<u64>) -> Result<()> {
    let manifest_path = required(args.manifest, "manifest")?;
    let manifest = load_manifest(&manifest_path)?;
    let out = required(args.out, "out")?;
    let seed = resolve_seed(args.seed, global_seed)?;
    let split_seed = args.split_seed.unwrap_or(seed);
    let split = DataSplit::new(
        &manifest,
        args.ratio.unwrap_or(DEFAULT_RATIO),
        split_seed,
        parse_split(args.split.as_deref())?,
    )?;
    let labels = manifest.label_names();
    let dataset = args.dataset.unwrap_or_else(|| dataset_name(&manifest_path));
    let frontend = args.frontend.as_deref().map(parse_frontend).transpose()?;

    let bytes = match (args.arch, args.method) {
        (Some(_), Some(_)) => return Err(user_error("give either --arch or --method, not both")),
        (None, None) => return Err(user_error("one of --arch or --method is required")),
        (Some(spec), None) => {
            let base = resolve_arch(&spec)?;
            let mut cfg = TrainConfig::for_family(family_of(&base), seed);
            cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
            cfg.learning_rate = args.lr.unwrap_or(cfg.learning_rate);
            cfg.batch_size = args.batch_size.unwrap_or(cfg.batch_size);
            cfg.validate()?;
            let mut arch = base.with_classes(labels.len());
            if let Some(f) = frontend {
                arch = arch.with_input(f.input_kind());
            }
            arch.validate()?;
            let input = Frontend::from_input_kind(arch.input);
            let xs = load_inputs(&split.train, |w| Ok(input.network_input(w, &arch)?))?;
            let mut ckpt = init_parameters::<f32>(&arch, seed)?;
            ckpt.labels = labels;
            let train_set = Dataset::from_samples(&xs, &arch.input_shape(), split.train.class_ids())?;
            let history = train_from(&mut ckpt, &cfg, &train_set, None, |r| {
                eprintln!(
                    "epoch {:>4}/{}  loss {:.6}  train accuracy {:.4}",
                    r.epoch + 1,
                    cfg.epochs,
                    r.train_loss,
                    r.train_accuracy
                );
            })?;
            let history_path = args.history.unwrap_or_else(|| with_suffix(&out, ".history.json"));
            write_atomic(&history_path, serde_json::to_string_pretty(&history)?.as_bytes())?;
            ckpt.to_bytes()?
        }
        (None, Some(method)) => {
            let spec = ClassifierSpec::preset(&method)?;
            let frontend = frontend.unwrap_or(Frontend::Mfcc);
            if frontend == Frontend::Raw {
                return Err(user_error("classical models need mfcc or logmel features"));
            }
            let xs = load_inputs(&split.train, |w| Ok(frontend.feature_vector(w)?))?;
            let data = FeatureSet::from_rows(&xs, split.train.class_ids(), labels.len())?;
            let model = fit_classifier(&spec, &data, seed)?;
            ClassicalModel {
                spec,
                model,
                dim: data.dim(),
                labels,
                frontend: frontend.name().into(),
            }
            .to_bytes()?
        }
    };
    write_atomic(&out, &bytes)?;
    // Score the bytes on disk so `ser eval` reproduces this number exactly.
    let model = AnyModel::from_bytes(&bytes)?;
    let result = evaluate(&model, &split.test, &dataset, split_seed)?;
    println!("test accuracy: {:.4}%", result.accuracy);
    Ok(())
}

pub fn eval(args: EvalArgs, global_seed: Option<u64>) -> Result<()> {
    let model = AnyModel::load(&required(args.model, "model")?)?;
    let manifest_path = required(args.manifest, "manifest")?;
    let manifest = load_manifest(&manifest_path)?;
    let names = manifest.label_names();
    if names != model.labels() {
        return Err(user_error(format!(
            "label sets differ: model has [{}], manifest has [{}]",
            model.labels().join(", "),
            names.join(", ")
        )));
    }
    if let Some(f) = args.frontend.as_deref().map(parse_frontend).transpose()? {
        let trained = model.frontend()?;
        if f != trained {
            return Err(user_error(format!("model expects {trained} input, not {f}")));
        }
    }
    let split_seed = resolve_seed(args.split_seed, global_seed)?;
    let split = DataSplit::new(
        &manifest,
        args.ratio.unwrap_or(DEFAULT_RATIO),
        split_seed,
        parse_split(args.split.as_deref())?,
    )?;
    let dataset = args.dataset.unwrap_or_else(|| dataset_name(&manifest_path));
    let result = evaluate(&model, &split.test, &dataset, split_seed)?;
    println!("test accuracy: {:.4}%", result.accuracy);
    for c in &result.per_class {
        println!("  {:<10} {:>8.4}%  (n = {})", c.label, c.accuracy, c.support);
    }
    if let Some(dir) = args.out_dir {
        write_atomic(&dir.join("result.json"), serde_json::to_string_pretty(&result)?.as_bytes())?;
        write_atomic(&dir.join("confusion.csv"), result.confusion.to_csv(&result.labels()).as_bytes())?;
    }
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = AnyModel::load(&required(args.model, "model")?)?;
    let files = args.files.unwrap_or_default();
    if files.is_empty() {
        return Err(user_error("no input files"));
    }
    let inputs = files
        .par_iter()
        .map(|p| {
            let w = Waveform32::load(p)?;
            model.input(&w).with_context(|| format!("preparing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = model.labels();
    let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| format!("class{i}"));
    for (path, (label, probs)) in files.iter().zip(model.predict(&inputs)?) {
        let scores: Vec<String> = probs.iter().enumerate().map(|(i, p)| format!("{}={p:.4}", name(i))).collect();
        println!("{}\t{}\t{}", path.display(), name(label), scores.join(" "));
    }
    Ok(())
}
