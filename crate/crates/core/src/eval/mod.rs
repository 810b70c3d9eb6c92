//! Accuracy metrics, the experiment grid and report rendering.

mod grid;
mod metrics;
mod report;

pub use grid::{
    cell_key, run_experiment_grid, CellStore, GridDataset, GridEvent, GridFailure, GridMethod, GridOptions,
    GridOutcome,
};
pub use metrics::{accuracy_overall, accuracy_per_class, confusion, ConfusionMatrix};
pub use report::{
    best_per_row, build_tables, render_report, Cell, RenderedReport, RenderedTable, Report, ResultTable,
    REPORT_SCHEMA_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::audio::{resample_linear, Waveform};
use crate::dsp::{
    fix_length, log_mel_spectrogram, mfcc, normalize_zscore, summarize_mean, FeatureMatrix, MelConfig,
    MfccConfig, PreprocessConfig, StftConfig,
};
use crate::nn::{ArchConfig, InputKind};
use crate::{Error, Result, Scalar};

/// Input representation for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frontend {
    Raw,
    Mfcc,
    Logmel,
}

impl Frontend {
    pub const ALL: [Frontend; 3] = [Frontend::Raw, Frontend::Mfcc, Frontend::Logmel];

    pub fn name(self) -> &'static str {
        match self {
            Frontend::Raw => "raw",
            Frontend::Mfcc => "mfcc",
            Frontend::Logmel => "logmel",
        }
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            Frontend::Raw => InputKind::Raw6s,
            Frontend::Mfcc => InputKind::Mfcc,
            Frontend::Logmel => InputKind::Logmel,
        }
    }

    pub fn from_input_kind(kind: InputKind) -> Self {
        match kind {
            InputKind::Raw6s => Frontend::Raw,
            InputKind::Mfcc => Frontend::Mfcc,
            InputKind::Logmel => Frontend::Logmel,
        }
    }

    /// Feature matrix at the canonical rate; not defined for `Raw`.
    pub fn features<T: Scalar>(self, w: &Waveform<T>) -> Result<FeatureMatrix<T>> {
        let rate = PreprocessConfig::default().sample_rate;
        match self {
            Frontend::Raw => Err(Error::Config("the raw frontend has no feature matrix".into())),
            Frontend::Mfcc => {
                let w = if w.sample_rate == rate { w.clone() } else { resample_linear(w, rate) };
                mfcc(&w, &MfccConfig::default(), &StftConfig::default())
            }
            Frontend::Logmel => log_mel_spectrogram(
                w,
                &PreprocessConfig::default(),
                &StftConfig::default(),
                &MelConfig::default(),
            ),
        }
    }

    /// Mean over frames: 40 values for MFCC, 128 for log-mel.
    pub fn feature_vector<T: Scalar>(self, w: &Waveform<T>) -> Result<Vec<T>> {
        Ok(summarize_mean(&self.features(w)?))
    }

    /// Flattened per-sample network input matching `arch.input_shape()`.
    pub fn network_input<T: Scalar>(self, w: &Waveform<T>, arch: &ArchConfig) -> Result<Vec<T>> {
        if w.is_empty() {
            return Err(Error::Config("empty waveform".into()));
        }
        match self {
            Frontend::Raw => {
                let pre = PreprocessConfig {
                    target_seconds: arch.raw_seconds(),
                    ..PreprocessConfig::default()
                };
                let w = if w.sample_rate == pre.sample_rate {
                    w.clone()
                } else {
                    resample_linear(w, pre.sample_rate)
                };
                Ok(fix_length(&normalize_zscore(&w, pre.epsilon), &pre).samples)
            }
            _ => Ok(self.features(w)?.values),
        }
    }
}

impl std::fmt::Display for Frontend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Frontend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "raw6s" => Ok(Frontend::Raw),
            "mfcc" => Ok(Frontend::Mfcc),
            "logmel" | "mel" => Ok(Frontend::Logmel),
            other => Err(Error::Config(format!("unknown frontend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodFamily {
    Classical,
    Deep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: String,
    /// One-vs-rest accuracy in percent.
    pub accuracy: f64,
    pub support: u64,
    /// No test samples of this class; the accuracy is all true negatives.
    pub undefined_support: bool,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub method: String,
    pub family: MethodFamily,
    pub frontend: Frontend,
    /// Percent, `100 * trace / total`.
    pub accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    pub confusion: ConfusionMatrix,
    pub wall_ms: u64,
    pub seed: u64,
}

impl ExperimentResult {
    #[allow(clippy::too_many_arguments)]
    pub fn from_predictions(
        dataset: &str,
        method: &str,
        family: MethodFamily,
        frontend: Frontend,
        labels: &[String],
        preds: &[usize],
        truths: &[usize],
        seed: u64,
        wall_ms: u64,
    ) -> Result<Self> {
        let cm = confusion(preds, truths, labels.len())?;
        let accuracy = accuracy_overall(&cm)?;
        let rows = cm.row_sums();
        let per_class = labels
            .iter()
            .enumerate()
            .map(|(c, l)| ClassAccuracy {
                label: l.clone(),
                accuracy: accuracy_per_class(&cm, c),
                support: rows[c],
                undefined_support: rows[c] == 0,
            })
            .collect();
        Ok(Self {
            dataset: dataset.to_string(),
            method: method.to_string(),
            family,
            frontend,
            accuracy,
            per_class,
            confusion: cm,
            wall_ms,
            seed,
        })
    }

    pub fn labels(&self) -> Vec<String> {
        self.per_class.iter().map(|c| c.label.clone()).collect()
    }
}
