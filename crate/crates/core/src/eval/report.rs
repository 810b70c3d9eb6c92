use serde::{Deserialize, Serialize};

use super::{ExperimentResult, Frontend, GridFailure, MethodFamily};
use crate::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub results: Vec<ExperimentResult>,
    #[serde(default)]
    pub failures: Vec<GridFailure>,
}

impl Report {
    pub fn new(results: Vec<ExperimentResult>, failures: Vec<GridFailure>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            results,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Failed,
    Missing,
}

/// Datasets down, methods across, for one (family, frontend) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub family: MethodFamily,
    pub frontend: Frontend,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn title(&self) -> String {
        let family = match self.family {
            MethodFamily::Classical => "machine learning methods",
            MethodFamily::Deep => "deep learning methods",
        };
        let input = match self.frontend {
            Frontend::Raw => "raw audio",
            Frontend::Mfcc => "MFCC features",
            Frontend::Logmel => "log-mel spectrogram features",
        };
        format!("Accuracy (%) of {family} with {input}")
    }

    pub fn file_stem(&self) -> String {
        let family = match self.family {
            MethodFamily::Classical => "classical",
            MethodFamily::Deep => "deep",
        };
        format!("table_{family}_{}", self.frontend)
    }

    pub fn render_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::with_capacity(self.datasets.len() + 1);
        rows.push(std::iter::once("DATASET".to_string()).chain(self.methods.iter().cloned()).collect());
        for (d, cells) in self.datasets.iter().zip(&self.cells) {
            let values: Vec<Option<f64>> = cells
                .iter()
                .map(|c| match c {
                    Cell::Value(v) => Some(*v),
                    _ => None,
                })
                .collect();
            let best = best_per_row(&values);
            let mut row = vec![d.clone()];
            for (c, b) in cells.iter().zip(best) {
                row.push(match c {
                    Cell::Value(v) if b => format!("{v:.2}*"),
                    Cell::Value(v) => format!("{v:.2}"),
                    Cell::Failed => "FAIL".into(),
                    Cell::Missing => "-".into(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{}\n", self.title());
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (s, w))| if j == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out.push_str("* best in row\n");
        out
    }
}

/// Marks every cell holding the row maximum.
pub fn best_per_row(values: &[Option<f64>]) -> Vec<bool> {
    let max = values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| v.is_some_and(|v| v == max)).collect()
}

/// Groups results into tables ordered classical before deep, then MFCC,
/// log-mel, raw. Rows and columns keep first-appearance order.
pub fn build_tables(results: &[ExperimentResult], failures: &[GridFailure]) -> Vec<ResultTable> {
    let mut keys: Vec<(MethodFamily, Frontend)> = Vec::new();
    keys.extend(results.iter().map(|r| (r.family, r.frontend)));
    keys.extend(failures.iter().map(|f| (f.family, f.frontend)));
    let order = |fe: Frontend| match fe {
        Frontend::Mfcc => 0,
        Frontend::Logmel => 1,
        Frontend::Raw => 2,
    };
    keys.sort_by_key(|&(fam, fe)| (fam, order(fe)));
    keys.dedup();
    keys.into_iter()
        .map(|(family, frontend)| {
            let mut methods: Vec<String> = Vec::new();
            let mut datasets: Vec<String> = Vec::new();
            let push = |v: &mut Vec<String>, s: &str| {
                if !v.iter().any(|x| x == s) {
                    v.push(s.to_string());
                }
            };
            let in_table_r: Vec<&ExperimentResult> =
                results.iter().filter(|r| r.family == family && r.frontend == frontend).collect();
            let in_table_f: Vec<&GridFailure> = failures
                .iter()
                .filter(|f| f.family == family && f.frontend == frontend)
                .collect();
            for r in &in_table_r {
                push(&mut datasets, &r.dataset);
                push(&mut methods, &r.method);
            }
            for f in &in_table_f {
                push(&mut datasets, &f.dataset);
                push(&mut methods, &f.method);
            }
            let cells = datasets
                .iter()
                .map(|d| {
                    methods
                        .iter()
                        .map(|m| {
                            if let Some(r) = in_table_r.iter().find(|r| &r.dataset == d && &r.method == m) {
                                Cell::Value(r.accuracy)
                            } else if in_table_f.iter().any(|f| &f.dataset == d && &f.method == m) {
                                Cell::Failed
                            } else {
                                Cell::Missing
                            }
                        })
                        .collect()
                })
                .collect();
            ResultTable {
                family,
                frontend,
                methods,
                datasets,
                cells,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub file_stem: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub json: String,
    pub csv: String,
    pub tables: Vec<RenderedTable>,
    /// `(file name, csv)` per result.
    pub confusions: Vec<(String, String)>,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_report(results: &[ExperimentResult], failures: &[GridFailure]) -> Result<RenderedReport> {
    let report = Report::new(results.to_vec(), failures.to_vec());
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let mut csv = String::from("dataset,method,frontend,accuracy,seed,wall_ms\n");
    for r in results {
        csv.push_str(&format!(
            "{},{},{},{:.4},{},{}\n",
            csv_field(&r.dataset),
            csv_field(&r.method),
            r.frontend,
            r.accuracy,
            r.seed,
            r.wall_ms
        ));
    }
    let tables = build_tables(results, failures)
        .iter()
        .map(|t| RenderedTable {
            file_stem: t.file_stem(),
            text: t.render_text(),
        })
        .collect();
    let confusions = results
        .iter()
        .map(|r| {
            (
                format!("confusion_{}_{}_{}.csv", slug(&r.dataset), r.frontend, slug(&r.method)),
                r.confusion.to_csv(&r.labels()),
            )
        })
        .collect();
    Ok(RenderedReport {
        json,
        csv,
        tables,
        confusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(dataset: &str, method: &str, family: MethodFamily, frontend: Frontend, hits: usize) -> ExperimentResult {
        let labels = vec!["neutral".to_string(), "angry".to_string()];
        let truths = vec![0, 0, 1, 1];
        let preds: Vec<usize> = truths.iter().enumerate().map(|(i, &t)| if i < hits { t } else { 1 - t }).collect();
        ExperimentResult::from_predictions(dataset, method, family, frontend, &labels, &preds, &truths, 1, 0).unwrap()
    }

    #[test]
    fn best_marking() {
        assert_eq!(best_per_row(&[Some(90.34), Some(89.42), Some(85.35)]), vec![true, false, false]);
        assert_eq!(best_per_row(&[None, Some(1.0), Some(1.0)]), vec![false, true, true]);
    }

    #[test]
    fn one_result_one_row() {
        let r = render_report(&[result("toy", "SVM", MethodFamily::Classical, Frontend::Mfcc, 3)], &[]).unwrap();
        let lines: Vec<&str> = r.csv.lines().collect();
        assert_eq!(lines, ["dataset,method,frontend,accuracy,seed,wall_ms", "toy,SVM,mfcc,75.0000,1,0"]);
        let back: Report = serde_json::from_str(&r.json).unwrap();
        assert_eq!(back.results[0], result("toy", "SVM", MethodFamily::Classical, Frontend::Mfcc, 3));
        assert_eq!(r.confusions[0].0, "confusion_toy_mfcc_svm.csv");
        assert_eq!(r.confusions[0].1, "true\\predicted,neutral,angry\nneutral,2,0\nangry,1,1\n");
    }

    #[test]
    fn deep_table_layout() {
        let mut results = Vec::new();
        for d in ["EMO-DB", "RAVDESS", "TESS", "CREMA", "SAVEE", "TESS+RAVDESS"] {
            for (m, hits) in [("CNN", 4), ("LSTM", 3), ("CNN-LSTM", 2)] {
                results.push(result(d, m, MethodFamily::Deep, Frontend::Raw, hits));
            }
        }
        let failures = vec![GridFailure {
            dataset: "SAVEE".into(),
            method: "CNN".into(),
            family: MethodFamily::Deep,
            frontend: Frontend::Logmel,
            error: "x".into(),
        }];
        let tables = build_tables(&results, &failures);
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].frontend, Frontend::Logmel);
        let raw = &tables[1];
        assert_eq!(raw.cells.len() * raw.cells[0].len(), 18);
        let text = raw.render_text();
        let header = text.lines().nth(1).unwrap();
        assert_eq!(header.split_whitespace().count(), raw.methods.len() + 1);
        assert!(text.contains("100.00*"));
        assert!(tables[0].render_text().contains("FAIL"));
    }
}
