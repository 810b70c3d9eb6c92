use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ser_core::audio::{
    parse_wav, resample_linear, scan_corpus, CorpusConvention, DatasetManifest, CANONICAL_RATE,
};
use ser_core::dsp::write_features;
use ser_core::eval::Frontend;
use ser_core::Waveform32;

use crate::config::{required, user_error, ExtractArgs, ScanArgs};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temp file so an interrupted run never leaves a
/// truncated output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    Ok(DatasetManifest::read_csv(path)?)
}

pub fn parse_frontend(s: &str) -> Result<Frontend> {
    Ok(s.parse::<Frontend>()?)
}

pub fn scan(args: ScanArgs) -> Result<()> {
    let root = required(args.root, "root")?;
    let convention: CorpusConvention = required(args.convention, "convention")?.parse()?;
    let out = required(args.out, "out")?;
    // Absolute paths keep the manifest valid wherever it is written.
    let root = root.canonicalize().unwrap_or(root);
    let manifest = scan_corpus(&root, convention)?;
    write_atomic(&out, manifest.to_csv().as_bytes())?;
    let counts = manifest.class_counts();
    let summary: Vec<String> = manifest
        .label_names()
        .iter()
        .zip(&counts)
        .map(|(l, n)| format!("{l}={n}"))
        .collect();
    println!("{} files, {} classes ({})", manifest.len(), manifest.n_classes(), summary.join(" "));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    source: PathBuf,
    source_sha256: String,
    frontend: Frontend,
    output_sha256: String,
}

const INDEX_FILE: &str = "index.json";

/// `<stem>.<frontend>.serf`, with `_<n>` appended to repeated stems.
fn output_names(manifest: &DatasetManifest, frontend: Frontend) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    manifest
        .entries()
        .iter()
        .map(|e| {
            let stem = e
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "clip".into());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                format!("{stem}.{frontend}.serf")
            } else {
                format!("{stem}_{n}.{frontend}.serf")
            }
        })
        .collect()
}

enum Outcome {
    Written(IndexEntry),
    Skipped(IndexEntry),
    Failed(String),
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let manifest = load_manifest(&required(args.manifest, "manifest")?)?;
    let frontend = parse_frontend(&required(args.frontend, "frontend")?)?;
    if frontend == Frontend::Raw {
        return Err(user_error("extract needs a feature frontend (mfcc or logmel)"));
    }
    let out_dir = required(args.out_dir, "out-dir")?;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let index_path = out_dir.join(INDEX_FILE);
    let index: BTreeMap<String, IndexEntry> = match std::fs::read(&index_path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .with_context(|| format!("reading {}", index_path.display()))?,
        Err(_) => BTreeMap::new(),
    };
    let names = output_names(&manifest, frontend);

    let outcomes: Vec<(String, Outcome)> = manifest
        .entries()
        .par_iter()
        .zip(names.par_iter())
        .map(|(entry, name)| {
            let target = out_dir.join(name);
            let run = || -> Result<Outcome> {
                let wav = std::fs::read(&entry.path)
                    .with_context(|| format!("reading {}", entry.path.display()))?;
                let source_sha256 = sha256_hex(&wav);
                if let (Some(prev), Ok(existing)) = (index.get(name), std::fs::read(&target)) {
                    if prev.source_sha256 == source_sha256
                        && prev.frontend == frontend
                        && prev.output_sha256 == sha256_hex(&existing)
                    {
                        return Ok(Outcome::Skipped(prev.clone()));
                    }
                }
                let w: Waveform32 = parse_wav(&wav)
                    .with_context(|| format!("decoding {}", entry.path.display()))?;
                let w = resample_linear(&w, CANONICAL_RATE);
                let bytes = write_features(&frontend.features(&w)?);
                write_atomic(&target, &bytes)?;
                Ok(Outcome::Written(IndexEntry {
                    source: entry.path.clone(),
                    source_sha256,
                    frontend,
                    output_sha256: sha256_hex(&bytes),
                }))
            };
            let outcome = run().unwrap_or_else(|e| Outcome::Failed(format!("{e:#}")));
            (name.clone(), outcome)
        })
        .collect();

    let mut next = BTreeMap::new();
    let (mut written, mut skipped, mut failed) = (0, 0, 0);
    for (name, outcome) in outcomes {
        match outcome {
            Outcome::Written(e) => {
                written += 1;
                next.insert(name, e);
            }
            Outcome::Skipped(e) => {
                skipped += 1;
                next.insert(name, e);
            }
            Outcome::Failed(msg) => {
                failed += 1;
                eprintln!("warning: {name}: {msg}");
            }
        }
    }
    if next != index || !index_path.exists() {
        write_atomic(&index_path, serde_json::to_string_pretty(&next)?.as_bytes())?;
    }
    println!("{written} written, {skipped} unchanged, {failed} failed");
    if failed > 0 && written + skipped == 0 {
        return Err(user_error(format!("all {failed} files failed")));
    }
    Ok(())
}
