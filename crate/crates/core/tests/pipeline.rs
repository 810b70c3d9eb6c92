mod common;

use std::cell::RefCell;
use std::collections::HashMap;

use tempfile::TempDir;

use ser_core::audio::{split_stratified, DatasetManifest};
use ser_core::classical::ClassifierSpec;
use ser_core::eval::{
    build_tables, run_experiment_grid, Cell, CellStore, ExperimentResult, Frontend, GridDataset, GridEvent,
    GridMethod, GridOptions, MethodFamily,
};
use ser_core::nn::{ArchConfig, ModelFamily, TrainConfig};

use common::{tone_corpus, FOUR_TONES};

#[derive(Default)]
struct MemoryStore(RefCell<HashMap<String, ExperimentResult>>);

impl CellStore for MemoryStore {
    fn load(&self, key: &str) -> Option<ExperimentResult> {
        self.0.borrow().get(key).cloned()
    }

    fn store(&self, key: &str, result: &ExperimentResult) {
        self.0.borrow_mut().insert(key.to_string(), result.clone());
    }
}

const TINY: &str = r#"{"schema_version":1,"name":"tiny","input":"raw6s","raw_seconds":0.25,"n_classes":4,
  "layers":[{"type":"conv1d","filters":4,"kernel":16,"stride":8},{"type":"relu"},
  {"type":"flatten"},{"type":"dense","units":4},{"type":"softmax"}]}"#;

fn methods() -> Vec<GridMethod> {
    let mut m: Vec<GridMethod> = ["NB", "DT"]
        .iter()
        .map(|&n| GridMethod::Classical {
            name: n.into(),
            spec: ClassifierSpec::preset(n).unwrap(),
        })
        .collect();
    m.push(GridMethod::Deep {
        name: "TINY".into(),
        arch: ArchConfig::from_json(TINY).unwrap(),
        train: TrainConfig {
            epochs: 2,
            ..TrainConfig::for_family(ModelFamily::Cnn, 0)
        },
    });
    m
}

#[test]
fn manifest_csv_roundtrip_and_stratified_split() {
    let dir = TempDir::new().unwrap();
    let m = tone_corpus(dir.path(), &FOUR_TONES, 10, 0.2, 20.0, 1);
    let back = DatasetManifest::parse_csv(&m.to_csv(), dir.path()).unwrap();
    assert_eq!(back, m);

    let split = split_stratified(&m, 0.8, 9).unwrap();
    assert_eq!(split.train.class_counts(), vec![8; 4]);
    assert_eq!(split.test.class_counts(), vec![2; 4]);
    let mut paths: Vec<_> = split.train.entries().iter().chain(split.test.entries()).map(|e| &e.path).collect();
    paths.sort();
    paths.dedup();
    assert_eq!(paths.len(), 40);
    assert_eq!(split_stratified(&m, 0.8, 9).unwrap(), split);
}

#[test]
fn grid_fills_tables_and_reuses_cells() {
    let dir = TempDir::new().unwrap();
    let datasets: Vec<GridDataset> = ["A", "B"]
        .iter()
        .enumerate()
        .map(|(i, n)| GridDataset {
            name: n.to_string(),
            manifest: tone_corpus(&dir.path().join(n), &FOUR_TONES, 5, 0.3, 20.0, i as u64),
        })
        .collect();
    let frontends = [Frontend::Mfcc, Frontend::Raw];
    let opts = GridOptions::default();
    let store = MemoryStore::default();

    let first = run_experiment_grid::<f32>(&datasets, &methods(), &frontends, &opts, Some(&store), |_| {});
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    // Classical methods skip raw audio: 2 datasets x (2 + 1 mfcc + 1 raw).
    assert_eq!(first.results.len(), 8);
    for r in &first.results {
        let test = split_stratified(&datasets.iter().find(|d| d.name == r.dataset).unwrap().manifest, 0.8, r.seed)
            .unwrap()
            .test;
        let support: Vec<u64> = test.class_counts().iter().map(|&c| c as u64).collect();
        assert_eq!(r.confusion.row_sums(), support, "{} {}", r.dataset, r.method);
        assert_eq!(r.wall_ms, 0);
    }

    let tables = build_tables(&first.results, &first.failures);
    let layout: Vec<_> = tables.iter().map(|t| (t.family, t.frontend, t.methods.clone())).collect();
    assert_eq!(
        layout,
        vec![
            (MethodFamily::Classical, Frontend::Mfcc, vec!["NB".to_string(), "DT".to_string()]),
            (MethodFamily::Deep, Frontend::Mfcc, vec!["TINY".to_string()]),
            (MethodFamily::Deep, Frontend::Raw, vec!["TINY".to_string()]),
        ]
    );
    assert!(tables.iter().all(|t| t.datasets == ["A", "B"]));
    assert!(tables.iter().flat_map(|t| t.cells.iter().flatten()).all(|c| matches!(c, Cell::Value(_))));

    let mut reused = 0;
    let second = run_experiment_grid::<f32>(&datasets, &methods(), &frontends, &opts, Some(&store), |ev| {
        if matches!(ev, GridEvent::Reused(_)) {
            reused += 1;
        }
    });
    assert_eq!(reused, 8);
    assert_eq!(second.results, first.results);
}

#[test]
fn unreadable_audio_fails_the_cell_only() {
    let dir = TempDir::new().unwrap();
    let manifest = tone_corpus(dir.path(), &FOUR_TONES, 4, 0.3, 20.0, 3);
    std::fs::remove_file(&manifest.entries()[0].path).unwrap();
    let datasets = vec![GridDataset {
        name: "A".into(),
        manifest,
    }];
    let out = run_experiment_grid::<f32>(&datasets, &methods(), &[Frontend::Mfcc], &GridOptions::default(), None, |_| {});
    assert!(out.results.is_empty());
    assert_eq!(out.failures.len(), 3);
    let tables = build_tables(&out.results, &out.failures);
    assert_eq!(tables.len(), 2);
    assert_eq!(tables[0].cells, vec![vec![Cell::Failed, Cell::Failed]]);
    assert_eq!(tables[0].render_text().lines().nth(2).unwrap().split_whitespace().collect::<Vec<_>>(), ["A", "FAIL", "FAIL"]);
}
