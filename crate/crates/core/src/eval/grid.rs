use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, Frontend, MethodFamily};
use crate::audio::{DataSplit, DatasetManifest, SplitMode, Waveform};
use crate::classical::{fit_classifier, Classifier, ClassifierSpec, FeatureSet};
use crate::nn::{train, ArchConfig, Dataset, TrainConfig};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct GridDataset {
    pub name: String,
    pub manifest: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GridMethod {
    Classical { name: String, spec: ClassifierSpec },
    Deep { name: String, arch: ArchConfig, train: TrainConfig },
}

impl GridMethod {
    pub fn name(&self) -> &str {
        match self {
            GridMethod::Classical { name, .. } | GridMethod::Deep { name, .. } => name,
        }
    }

    pub fn family(&self) -> MethodFamily {
        match self {
            GridMethod::Classical { .. } => MethodFamily::Classical,
            GridMethod::Deep { .. } => MethodFamily::Deep,
        }
    }

    /// Classical models need a feature matrix to average.
    pub fn supports(&self, frontend: Frontend) -> bool {
        !(self.family() == MethodFamily::Classical && frontend == Frontend::Raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub seed: u64,
    pub train_ratio: f64,
    pub split: SplitMode,
    /// Store measured wall time; off keeps reports reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            train_ratio: 0.8,
            split: SplitMode::Random,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub dataset: String,
    pub method: String,
    pub family: MethodFamily,
    pub frontend: Frontend,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOutcome {
    pub results: Vec<ExperimentResult>,
    pub failures: Vec<GridFailure>,
}

/// Persistence for finished cells, keyed by [`cell_key`].
pub trait CellStore {
    fn load(&self, key: &str) -> Option<ExperimentResult>;
    fn store(&self, key: &str, result: &ExperimentResult);
}

pub enum GridEvent<'a> {
    Started {
        dataset: &'a str,
        method: &'a str,
        frontend: Frontend,
    },
    Finished(&'a ExperimentResult),
    Reused(&'a ExperimentResult),
    Failed(&'a GridFailure),
}

/// Canonical description of everything a cell's result depends on, short
/// of the audio bytes themselves.
pub fn cell_key(dataset: &GridDataset, method: &GridMethod, frontend: Frontend, opts: &GridOptions) -> String {
    serde_json::json!({
        "dataset": dataset.name,
        "manifest": dataset.manifest.to_csv(),
        "method": method,
        "frontend": frontend,
        "options": opts,
    })
    .to_string()
}

struct Inputs<T> {
    train: Vec<Vec<T>>,
    train_labels: Vec<usize>,
    test: Vec<Vec<T>>,
    test_labels: Vec<usize>,
}

/// Loads the split's audio once per dataset.
struct DatasetAudio<T> {
    split: DataSplit,
    train: Vec<Waveform<T>>,
    test: Vec<Waveform<T>>,
    labels: Vec<String>,
}

fn load_audio<T: Scalar>(d: &GridDataset, opts: &GridOptions) -> Result<DatasetAudio<T>> {
    let split = DataSplit::new(&d.manifest, opts.train_ratio, opts.seed, opts.split)?;
    let load = |m: &DatasetManifest| {
        m.entries()
            .iter()
            .map(|e| Waveform::load(&e.path))
            .collect::<Result<Vec<_>>>()
    };
    Ok(DatasetAudio {
        train: load(&split.train)?,
        test: load(&split.test)?,
        labels: d.manifest.label_names(),
        split,
    })
}

fn prepare<T: Scalar>(
    audio: &DatasetAudio<T>,
    f: impl Fn(&Waveform<T>) -> Result<Vec<T>>,
) -> Result<Inputs<T>> {
    Ok(Inputs {
        train: audio.train.iter().map(&f).collect::<Result<_>>()?,
        train_labels: audio.split.train.class_ids(),
        test: audio.test.iter().map(&f).collect::<Result<_>>()?,
        test_labels: audio.split.test.class_ids(),
    })
}

fn run_cell<T: Scalar>(
    method: &GridMethod,
    frontend: Frontend,
    audio: &DatasetAudio<T>,
    cache: &mut BTreeMap<String, Inputs<T>>,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = audio.labels.len();
    match method {
        GridMethod::Classical { spec, .. } => {
            let key = format!("vec/{frontend}");
            if !cache.contains_key(&key) {
                cache.insert(key.clone(), prepare(audio, |w| frontend.feature_vector(w))?);
            }
            let inputs = &cache[&key];
            let train = FeatureSet::from_rows(&inputs.train, inputs.train_labels.clone(), k)?;
            let model = fit_classifier(spec, &train, seed)?;
            Ok(inputs.test.iter().map(|x| model.predict(x)).collect())
        }
        GridMethod::Deep { arch, train: cfg, .. } => {
            let arch = arch.with_classes(k).with_input(frontend.input_kind());
            arch.validate()?;
            let shape = arch.input_shape();
            let key = format!("net/{frontend}/{:?}", shape);
            if !cache.contains_key(&key) {
                cache.insert(key.clone(), prepare(audio, |w| frontend.network_input(w, &arch))?);
            }
            let inputs = &cache[&key];
            let train_set = Dataset::from_samples(&inputs.train, &shape, inputs.train_labels.clone())?;
            let test_set = Dataset::from_samples(&inputs.test, &shape, inputs.test_labels.clone())?;
            let cfg = TrainConfig { seed, ..cfg.clone() };
            let (ckpt, _) = train(&arch, &cfg, &train_set, None)?;
            Ok(ckpt.predict(&test_set.inputs)?.into_iter().map(|p| p.label).collect())
        }
    }
}

/// Every supported (dataset, frontend, method) cell, in that nesting order.
/// A failing cell is recorded and the grid moves on.
pub fn run_experiment_grid<T: Scalar>(
    datasets: &[GridDataset],
    methods: &[GridMethod],
    frontends: &[Frontend],
    opts: &GridOptions,
    store: Option<&dyn CellStore>,
    mut on_event: impl FnMut(GridEvent<'_>),
) -> GridOutcome {
    let mut out = GridOutcome::default();
    for d in datasets {
        let mut audio: Option<Result<DatasetAudio<T>>> = None;
        let mut cache = BTreeMap::new();
        for &frontend in frontends {
            for m in methods.iter().filter(|m| m.supports(frontend)) {
                let key = cell_key(d, m, frontend, opts);
                if let Some(r) = store.and_then(|s| s.load(&key)) {
                    on_event(GridEvent::Reused(&r));
                    out.results.push(r);
                    continue;
                }
                on_event(GridEvent::Started {
                    dataset: &d.name,
                    method: m.name(),
                    frontend,
                });
                let started = Instant::now();
                let audio = audio.get_or_insert_with(|| load_audio(d, opts));
                let outcome = match audio {
                    Err(e) => Err(Error::Eval(format!("loading {}: {e}", d.name))),
                    Ok(a) => run_cell(m, frontend, a, &mut cache, opts.seed).and_then(|preds| {
                        let wall_ms = if opts.record_timing {
                            started.elapsed().as_millis() as u64
                        } else {
                            0
                        };
                        ExperimentResult::from_predictions(
                            &d.name,
                            m.name(),
                            m.family(),
                            frontend,
                            &a.labels,
                            &preds,
                            &a.split.test.class_ids(),
                            opts.seed,
                            wall_ms,
                        )
                    }),
                };
                match outcome {
                    Ok(r) => {
                        if let Some(s) = store {
                            s.store(&key, &r);
                        }
                        on_event(GridEvent::Finished(&r));
                        out.results.push(r);
                    }
                    Err(e) => {
                        let f = GridFailure {
                            dataset: d.name.clone(),
                            method: m.name().to_string(),
                            family: m.family(),
                            frontend,
                            error: e.to_string(),
                        };
                        on_event(GridEvent::Failed(&f));
                        out.failures.push(f);
                    }
                }
            }
        }
    }
    out
}
