use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use serde::{Deserialize, Serialize};

use ser_core::classical::ClassifierSpec;
use ser_core::eval::{
    render_report, run_experiment_grid, CellStore, ExperimentResult, Frontend, GridDataset, GridEvent,
    GridMethod, GridOptions,
};
use ser_core::nn::{ArchConfig, TrainConfig};

use crate::config::{required, resolve_seed, user_error, GridArgs};
use crate::data::{load_manifest, parse_frontend, sha256_hex, write_atomic};
use crate::model::{dataset_name, family_of, resolve_arch, DEFAULT_RATIO};

/// Finished cells under `<out>/cells/<sha256 of the cell key>.json`.
struct DirStore {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct StoredCell {
    key: String,
    result: ExperimentResult,
}

impl DirStore {
    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{}.json", sha256_hex(key.as_bytes())))
    }
}

impl CellStore for DirStore {
    fn load(&self, key: &str) -> Option<ExperimentResult> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        let cell: StoredCell = serde_json::from_slice(&bytes).ok()?;
        (cell.key == key).then_some(cell.result)
    }

    fn store(&self, key: &str, result: &ExperimentResult) {
        let cell = StoredCell {
            key: key.to_string(),
            result: result.clone(),
        };
        let written = serde_json::to_vec(&cell)
            .map_err(anyhow::Error::from)
            .and_then(|bytes| write_atomic(&self.path(key), &bytes));
        if let Err(e) = written {
            eprintln!("warning: could not cache cell: {e:#}");
        }
    }
}

fn parse_dataset(spec: &str) -> Result<GridDataset> {
    let (name, path) = match spec.split_once('=') {
        Some((n, p)) => (n.to_string(), Path::new(p)),
        None => (dataset_name(Path::new(spec)), Path::new(spec)),
    };
    Ok(GridDataset {
        name,
        manifest: load_manifest(path)?,
    })
}

/// `NAME=ARCH` or a bare ARCH; builtins are named by their upper-cased key.
fn parse_arch(spec: &str) -> Result<(String, ArchConfig)> {
    Ok(match spec.split_once('=') {
        Some((n, a)) => (n.to_string(), resolve_arch(a)?),
        None => {
            let arch = resolve_arch(spec)?;
            let name = if ArchConfig::builtin(spec).is_some() {
                spec.to_ascii_uppercase()
            } else {
                arch.name.clone()
            };
            (name, arch)
        }
    })
}

pub fn grid(args: GridArgs, global_seed: Option<u64>) -> Result<()> {
    let out_dir = required(args.out_dir, "out-dir")?;
    let seed = resolve_seed(args.seed, global_seed)?;
    let specs = args.dataset.unwrap_or_default();
    if specs.is_empty() {
        return Err(user_error("at least one --dataset NAME=MANIFEST is required"));
    }
    let datasets = specs.iter().map(|s| parse_dataset(s)).collect::<Result<Vec<_>>>()?;

    let mut methods = Vec::new();
    for m in args.method.unwrap_or_default() {
        let spec = ClassifierSpec::preset(&m)?;
        methods.push(GridMethod::Classical {
            name: m.to_ascii_uppercase(),
            spec,
        });
    }
    for a in args.arch.unwrap_or_default() {
        let (name, arch) = parse_arch(&a)?;
        // Per-family defaults apply unless a flag overrides them.
        let base = TrainConfig::for_family(family_of(&arch), seed);
        let train = TrainConfig {
            epochs: args.epochs.unwrap_or(base.epochs),
            learning_rate: args.lr.unwrap_or(base.learning_rate),
            batch_size: args.batch_size.unwrap_or(base.batch_size),
            ..base
        };
        train.validate()?;
        methods.push(GridMethod::Deep { name, arch, train });
    }
    if methods.is_empty() {
        return Err(user_error("give at least one --method or --arch"));
    }
    let frontends = match args.frontend {
        Some(list) if !list.is_empty() => list.iter().map(|f| parse_frontend(f)).collect::<Result<Vec<_>>>()?,
        _ => Frontend::ALL.to_vec(),
    };
    let opts = GridOptions {
        seed,
        train_ratio: args.ratio.unwrap_or(DEFAULT_RATIO),
        split: args.split.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
        record_timing: args.timing.unwrap_or(false),
    };

    let store = DirStore {
        dir: out_dir.join("cells"),
    };
    let outcome = run_experiment_grid::<f32>(&datasets, &methods, &frontends, &opts, Some(&store), |ev| match ev {
        GridEvent::Started {
            dataset,
            method,
            frontend,
        } => eprintln!("{dataset} / {method} / {frontend} ..."),
        GridEvent::Finished(r) => eprintln!("  {:.2}%", r.accuracy),
        GridEvent::Reused(r) => eprintln!("{} / {} / {}: cached {:.2}%", r.dataset, r.method, r.frontend, r.accuracy),
        GridEvent::Failed(f) => eprintln!("  failed: {}", f.error),
    });

    let report = render_report(&outcome.results, &outcome.failures)?;
    write_atomic(&out_dir.join("results.json"), report.json.as_bytes())?;
    write_atomic(&out_dir.join("results.csv"), report.csv.as_bytes())?;
    write_atomic(
        &out_dir.join("failures.json"),
        serde_json::to_string_pretty(&outcome.failures)?.as_bytes(),
    )?;
    for t in &report.tables {
        write_atomic(&out_dir.join(format!("{}.txt", t.file_stem)), t.text.as_bytes())?;
        println!("{}", t.text);
    }
    for (name, csv) in &report.confusions {
        write_atomic(&out_dir.join("confusion").join(name), csv.as_bytes())?;
    }
    if outcome.results.is_empty() && !outcome.failures.is_empty() {
        return Err(anyhow!(
            "all {} cells failed; see {}",
            outcome.failures.len(),
            out_dir.join("failures.json").display()
        ));
    }
    Ok(())
}
