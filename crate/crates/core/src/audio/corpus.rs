//! Labeled corpus manifests and the RAVDESS / EMO-DB filename conventions.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The eight emotion categories, in reporting column order
/// (NR, HP, AG, SR, SD, DG, FR, BR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Happy,
    Angry,
    Surprised,
    Sad,
    Disgust,
    Fear,
    Bored,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Neutral,
        Emotion::Happy,
        Emotion::Angry,
        Emotion::Surprised,
        Emotion::Sad,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Bored,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Happy => "happy",
            Emotion::Angry => "angry",
            Emotion::Surprised => "surprised",
            Emotion::Sad => "sad",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Bored => "bored",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let e = match s.trim().to_ascii_lowercase().as_str() {
            "neutral" => Emotion::Neutral,
            "happy" | "happiness" => Emotion::Happy,
            "angry" | "anger" => Emotion::Angry,
            "surprised" | "surprise" | "ps" => Emotion::Surprised,
            "sad" | "sadness" => Emotion::Sad,
            "disgust" | "disgusted" => Emotion::Disgust,
            "fear" | "fearful" | "anxiety" => Emotion::Fear,
            "bored" | "boredom" | "calm" => Emotion::Bored,
            other => return Err(Error::Label(format!("unknown emotion name {other:?}"))),
        };
        Ok(e)
    }
}

/// An emotion together with its class id inside one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmotionLabel {
    pub id: usize,
    pub emotion: Emotion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub emotion: Emotion,
    pub speaker: String,
}

/// Labeled file list. Class ids are positions in `label_set`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    label_set: Vec<Emotion>,
}

impl DatasetManifest {
    /// Builds a manifest, checking that labels belong to `label_set` and that
    /// paths are unique.
    pub fn new(entries: Vec<ManifestEntry>, label_set: Vec<Emotion>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !label_set.contains(&e.emotion) {
                return Err(Error::Label(format!(
                    "{} is labeled {} which is outside the label set",
                    e.path.display(),
                    e.emotion
                )));
            }
            if !seen.insert(e.path.clone()) {
                return Err(Error::Config(format!(
                    "duplicate manifest path {}",
                    e.path.display()
                )));
            }
        }
        Ok(Self { entries, label_set })
    }

    /// Manifest whose label set is the emotions present, in canonical order.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let label_set = Emotion::ALL
            .into_iter()
            .filter(|e| entries.iter().any(|x| x.emotion == *e))
            .collect();
        Self::new(entries, label_set)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn label_set(&self) -> &[Emotion] {
        &self.label_set
    }

    /// Class names by id.
    pub fn label_names(&self) -> Vec<String> {
        self.label_set.iter().map(|e| e.name().to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.label_set.len()
    }

    pub fn class_id(&self, emotion: Emotion) -> Option<usize> {
        self.label_set.iter().position(|&e| e == emotion)
    }

    pub fn label(&self, index: usize) -> EmotionLabel {
        let emotion = self.entries[index].emotion;
        EmotionLabel {
            id: self.class_id(emotion).expect("validated on construction"),
            emotion,
        }
    }

    /// Class id of every entry, in entry order.
    pub fn class_ids(&self) -> Vec<usize> {
        (0..self.entries.len()).map(|i| self.label(i).id).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_set.len()];
        for id in self.class_ids() {
            counts[id] += 1;
        }
        counts
    }

    pub(crate) fn subset(&self, indices: &[usize]) -> Self {
        Self {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            label_set: self.label_set.clone(),
        }
    }

    /// Reads a `path,label,speaker` CSV. Relative paths resolve against
    /// the CSV's directory.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse_csv(&text, base)
    }

    pub fn parse_csv(text: &str, base: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let expected = ["path", "label", "speaker"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!(
                "manifest header must be path,label,speaker (got {})",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row?;
            let rel = PathBuf::from(&row[0]);
            let path = if rel.is_absolute() { rel } else { base.join(rel) };
            let emotion = row[1]
                .parse::<Emotion>()
                .map_err(|_| Error::Label(format!("{}: unknown label {:?}", &row[0], &row[1])))?;
            entries.push(ManifestEntry {
                path,
                emotion,
                speaker: row[2].to_string(),
            });
        }
        Self::from_entries(entries)
    }

    /// Serializes as CSV with paths written as given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,label,speaker\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{}\n",
                e.path.display(),
                e.emotion,
                e.speaker
            ));
        }
        out
    }
}

/// Naming convention used to pull labels out of a corpus tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusConvention {
    Ravdess,
    Emodb,
    ManifestCsv,
}

impl FromStr for CorpusConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ravdess" => Ok(Self::Ravdess),
            "emodb" | "emo-db" => Ok(Self::Emodb),
            "manifest-csv" | "csv" => Ok(Self::ManifestCsv),
            other => Err(Error::Config(format!("unknown corpus convention {other:?}"))),
        }
    }
}

impl CorpusConvention {
    /// Emotions a corpus using this convention can contain.
    pub fn declared_labels(self) -> &'static [Emotion] {
        match self {
            CorpusConvention::Ravdess | CorpusConvention::ManifestCsv => &Emotion::ALL,
            CorpusConvention::Emodb => &[
                Emotion::Neutral,
                Emotion::Happy,
                Emotion::Angry,
                Emotion::Sad,
                Emotion::Disgust,
                Emotion::Fear,
                Emotion::Bored,
            ],
        }
    }
}

/// `MM-VC-EE-II-SS-RR-AA.wav`: the third field is the emotion, the
/// seventh the actor. Calm (02) is folded into bored.
pub(crate) fn parse_ravdess_name(stem: &str) -> Result<(Emotion, String)> {
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7 {
        return Err(Error::Label(format!(
            "{stem}: expected 7 hyphen-separated fields"
        )));
    }
    let emotion = match fields[2] {
        "01" => Emotion::Neutral,
        "02" => Emotion::Bored,
        "03" => Emotion::Happy,
        "04" => Emotion::Sad,
        "05" => Emotion::Angry,
        "06" => Emotion::Fear,
        "07" => Emotion::Disgust,
        "08" => Emotion::Surprised,
        code => return Err(Error::Label(format!("{stem}: unknown emotion code {code}"))),
    };
    Ok((emotion, fields[6].to_string()))
}

/// `SSTTTEV.wav`: speaker in characters 1-2, emotion letter at position 6.
pub(crate) fn parse_emodb_name(stem: &str) -> Result<(Emotion, String)> {
    let chars: Vec<char> = stem.chars().collect();
    if chars.len() < 6 {
        return Err(Error::Label(format!("{stem}: name too short for EMO-DB")));
    }
    let emotion = match chars[5] {
        'W' => Emotion::Angry,
        'L' => Emotion::Bored,
        'E' => Emotion::Disgust,
        'A' => Emotion::Fear,
        'F' => Emotion::Happy,
        'T' => Emotion::Sad,
        'N' => Emotion::Neutral,
        code => return Err(Error::Label(format!("{stem}: unknown emotion letter {code}"))),
    };
    Ok((emotion, chars[..2].iter().collect()))
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Walks `root` and labels every WAV file by the given convention. For
/// `ManifestCsv`, `root` is either the CSV itself or a directory holding
/// `manifest.csv`.
pub fn scan_corpus(root: &Path, convention: CorpusConvention) -> Result<DatasetManifest> {
    if !root.exists() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root does not exist"),
        ));
    }
    let manifest = match convention {
        CorpusConvention::ManifestCsv => {
            let csv = if root.is_dir() {
                root.join("manifest.csv")
            } else {
                root.to_path_buf()
            };
            if !csv.exists() {
                return Err(Error::EmptyCorpus(root.to_path_buf()));
            }
            DatasetManifest::read_csv(&csv)?
        }
        CorpusConvention::Ravdess | CorpusConvention::Emodb => {
            let parse = match convention {
                CorpusConvention::Ravdess => parse_ravdess_name,
                _ => parse_emodb_name,
            };
            let mut entries = Vec::new();
            for item in walkdir::WalkDir::new(root).sort_by_file_name() {
                let item = item.map_err(|e| {
                    let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
                    Error::io(path, e.into())
                })?;
                let path = item.path();
                if !item.file_type().is_file() || !is_wav(path) {
                    continue;
                }
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let (emotion, speaker) = parse(stem)
                    .map_err(|e| Error::Label(format!("{}: {e}", path.display())))?;
                entries.push(ManifestEntry {
                    path: path.to_path_buf(),
                    emotion,
                    speaker,
                });
            }
            DatasetManifest::from_entries(entries)?
        }
    };
    if manifest.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    let declared = convention.declared_labels();
    debug_assert!(manifest.label_set().iter().all(|e| declared.contains(e)));
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravdess_angry_actor_twelve() {
        let (e, s) = parse_ravdess_name("03-01-05-01-01-01-12").unwrap();
        assert_eq!(e, Emotion::Angry);
        assert_eq!(s, "12");
    }

    #[test]
    fn ravdess_full_code_table() {
        let expected = [
            Emotion::Neutral,
            Emotion::Bored,
            Emotion::Happy,
            Emotion::Sad,
            Emotion::Angry,
            Emotion::Fear,
            Emotion::Disgust,
            Emotion::Surprised,
        ];
        for (i, want) in expected.iter().enumerate() {
            let name = format!("03-01-{:02}-01-01-01-01", i + 1);
            assert_eq!(parse_ravdess_name(&name).unwrap().0, *want);
        }
        assert!(matches!(parse_ravdess_name("03-01-09-01-01-01-01"), Err(Error::Label(_))));
    }

    #[test]
    fn emodb_happy_speaker_three() {
        let (e, s) = parse_emodb_name("03a01Fa").unwrap();
        assert_eq!(e, Emotion::Happy);
        assert_eq!(s, "03");
        for (letter, want) in [
            ('W', Emotion::Angry),
            ('L', Emotion::Bored),
            ('E', Emotion::Disgust),
            ('A', Emotion::Fear),
            ('F', Emotion::Happy),
            ('T', Emotion::Sad),
            ('N', Emotion::Neutral),
        ] {
            assert_eq!(parse_emodb_name(&format!("11b02{letter}c")).unwrap().0, want);
            assert!(CorpusConvention::Emodb.declared_labels().contains(&want));
        }
        assert!(parse_emodb_name("03a01Xa").is_err());
    }

    #[test]
    fn csv_single_row() {
        let m = DatasetManifest::parse_csv("path,label,speaker\na.wav,happy,s1\n", Path::new("/data")).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.entries()[0].path, PathBuf::from("/data/a.wav"));
        assert_eq!(m.label_set(), &[Emotion::Happy]);
        assert_eq!(m.entries()[0].speaker, "s1");
    }

    #[test]
    fn csv_rejects_bad_header_and_label() {
        assert!(DatasetManifest::parse_csv("file,label,speaker\n", Path::new("")).is_err());
        assert!(matches!(
            DatasetManifest::parse_csv("path,label,speaker\na.wav,joyful,s1\n", Path::new("")),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn duplicate_paths_rejected() {
        let e = ManifestEntry {
            path: "x.wav".into(),
            emotion: Emotion::Sad,
            speaker: "1".into(),
        };
        assert!(DatasetManifest::from_entries(vec![e.clone(), e]).is_err());
    }

    #[test]
    fn scan_tree_and_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            scan_corpus(dir.path(), CorpusConvention::Ravdess),
            Err(Error::EmptyCorpus(_))
        ));
        let actor = dir.path().join("Actor_01");
        std::fs::create_dir(&actor).unwrap();
        for name in ["03-01-05-01-01-01-01.wav", "03-01-01-01-01-01-01.wav", "notes.txt"] {
            std::fs::write(actor.join(name), b"").unwrap();
        }
        let m = scan_corpus(dir.path(), CorpusConvention::Ravdess).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.label_set(), &[Emotion::Neutral, Emotion::Angry]);
        std::fs::write(actor.join("03-01-11-01-01-01-01.wav"), b"").unwrap();
        let err = scan_corpus(dir.path(), CorpusConvention::Ravdess).unwrap_err();
        assert!(err.to_string().contains("03-01-11-01-01-01-01"), "{err}");
    }
}
