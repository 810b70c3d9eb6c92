//! Flag structs, the optional TOML config file, and exit-code classification.
//!
//! Every subcommand's flags double as a table in the config file, with the
//! same kebab-case keys. Flags given on the command line win.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::Deserialize;

/// Bad input from the user; the process exits with status 2.
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

pub fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

/// 2 for anything the user can fix, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UserError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ser_core::Error>() {
            return match e {
                ser_core::Error::Eval(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

/// Fills every `None` field of `self` from `file`.
macro_rules! merge_fields {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn merge(mut self, file: $ty) -> $ty {
                $(
                    if self.$field.is_none() {
                        self.$field = file.$field;
                    }
                )*
                self
            }
        }
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub scan: ScanArgs,
    pub extract: ExtractArgs,
    pub train: TrainArgs,
    pub eval: EvalArgs,
    pub predict: PredictArgs,
    pub grid: GridArgs,
    pub selftest: SelftestArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| user_error(format!("cannot read config {}: {e}", path.display())))?;
        let value: toml::Value = toml::from_str(&text)
            .map_err(|e| user_error(format!("config {}: {e}", path.display())))?;
        serde_path_to_error::deserialize(value).map_err(|e| {
            user_error(format!("config {} at `{}`: {}", path.display(), e.path(), e.inner()))
        })
    }
}

/// Flag, then config section, then global config seed, then `SER_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file_global: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file_global) {
        return Ok(s);
    }
    match std::env::var("SER_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| user_error(format!("SER_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| user_error(format!("missing required option --{flag}")))
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScanArgs {
    /// Corpus root directory (or manifest CSV for manifest-csv).
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// ravdess, emodb or manifest-csv.
    #[arg(long)]
    pub convention: Option<String>,
    /// Manifest CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(ScanArgs { root, convention, out });

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// mfcc or logmel.
    #[arg(long)]
    pub frontend: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
merge_fields!(ExtractArgs { manifest, frontend, out_dir });

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Network: cnn, lstm, cnn-lstm, cnn-small or an arch JSON file.
    #[arg(long)]
    pub arch: Option<String>,
    /// Classical model: SVM, RF, DT, NB, MV, STCK, KNN or LR.
    #[arg(long)]
    pub method: Option<String>,
    /// raw, mfcc or logmel. Networks default to their configured input,
    /// classical models to mfcc.
    #[arg(long)]
    pub frontend: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initialization and shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train/test split seed; defaults to the seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// random or by-speaker.
    #[arg(long)]
    pub split: Option<String>,
    /// Training fraction.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch history JSON; defaults to `<out>.history.json`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Name used in printed results; defaults to the manifest file stem.
    #[arg(long)]
    pub dataset: Option<String>,
}
merge_fields!(TrainArgs {
    manifest, arch, method, frontend, epochs, lr, batch_size, seed, split_seed, split, ratio, out,
    history, dataset,
});

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Model file written by `ser train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Must match the model's frontend when given.
    #[arg(long)]
    pub frontend: Option<String>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Directory for result.json and confusion.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
}
merge_fields!(EvalArgs { model, manifest, frontend, split_seed, split, ratio, out_dir, dataset });

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// WAV files to classify.
    #[arg(num_args = 0..)]
    pub files: Option<Vec<PathBuf>>,
}
merge_fields!(PredictArgs { model, files });

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridArgs {
    /// NAME=MANIFEST, repeatable.
    #[arg(long)]
    pub dataset: Option<Vec<String>>,
    /// Classical method, repeatable.
    #[arg(long)]
    pub method: Option<Vec<String>>,
    /// Network as ARCH or NAME=ARCH, repeatable.
    #[arg(long)]
    pub arch: Option<Vec<String>>,
    /// raw, mfcc or logmel, repeatable; all three when absent.
    #[arg(long)]
    pub frontend: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Record wall-clock time per cell (reports are then not reproducible).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timing: Option<bool>,
}
merge_fields!(GridArgs {
    dataset, method, arch, frontend, epochs, lr, batch_size, seed, split, ratio, out_dir, timing,
});

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
}
merge_fields!(SelftestArgs { seed });
