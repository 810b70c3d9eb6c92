use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetManifest;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Per-class random split.
    #[default]
    Random,
    /// Whole speakers go to one side.
    BySpeaker,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "by-speaker" => Ok(Self::BySpeaker),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    pub seed: u64,
    pub ratio: f64,
}

impl DataSplit {
    pub fn new(m: &DatasetManifest, ratio: f64, seed: u64, mode: SplitMode) -> Result<Self> {
        match mode {
            SplitMode::Random => split_stratified(m, ratio, seed),
            SplitMode::BySpeaker => split_by_speaker(m, ratio, seed),
        }
    }
}

/// Number of items sent to train out of `n`: the ceiling of `ratio * n`,
/// kept inside `[1, n - 1]`.
pub(crate) fn train_count(n: usize, ratio: f64) -> usize {
    // 0.7 * 10 is 7.000000000000001 in binary; don't let that round up.
    let raw = (ratio * n as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    Ok(())
}

/// Per class: shuffle with a seeded generator, send the first
/// `ceil(ratio * n_c)` to train and the rest to test.
pub fn split_stratified(m: &DatasetManifest, ratio: f64, seed: u64) -> Result<DataSplit> {
    check_ratio(ratio)?;
    let ids = m.class_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, emotion) in m.label_set().iter().enumerate() {
        let mut members: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::Stratify(format!(
                "class {emotion} has {} sample(s); at least 2 are needed",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let k = train_count(members.len(), ratio);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    Ok(DataSplit {
        train: m.subset(&train),
        test: m.subset(&test),
        seed,
        ratio,
    })
}

/// Group split on the speaker field: `ceil(ratio * n_speakers)` speakers
/// are drawn for training.
pub fn split_by_speaker(m: &DatasetManifest, ratio: f64, seed: u64) -> Result<DataSplit> {
    check_ratio(ratio)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in m.entries().iter().enumerate() {
        groups.entry(e.speaker.as_str()).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Stratify(format!(
            "speaker split needs at least 2 speakers, found {}",
            groups.len()
        )));
    }
    let mut speakers: Vec<&str> = groups.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    speakers.shuffle(&mut rng);
    let k = train_count(speakers.len(), ratio);
    let collect = |names: &[&str]| -> Vec<usize> {
        let mut idx: Vec<usize> = names.iter().flat_map(|s| groups[s].iter().copied()).collect();
        idx.sort_unstable();
        idx
    };
    Ok(DataSplit {
        train: m.subset(&collect(&speakers[..k])),
        test: m.subset(&collect(&speakers[k..])),
        seed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::path::PathBuf;

    use proptest::prelude::*;

    use super::*;
    use crate::audio::{Emotion, ManifestEntry};

    fn manifest(counts: &[(Emotion, usize)]) -> DatasetManifest {
        let mut entries = Vec::new();
        for &(emotion, n) in counts {
            for i in 0..n {
                entries.push(ManifestEntry {
                    path: PathBuf::from(format!("{emotion}_{i}.wav")),
                    emotion,
                    speaker: format!("s{}", i % 5),
                });
            }
        }
        DatasetManifest::from_entries(entries).unwrap()
    }

    #[test]
    fn ten_per_class_gives_eight_two() {
        let m = manifest(&[(Emotion::Happy, 10), (Emotion::Sad, 10), (Emotion::Fear, 10)]);
        let s = split_stratified(&m, 0.8, 7).unwrap();
        assert_eq!(s.train.class_counts(), vec![8, 8, 8]);
        assert_eq!(s.test.class_counts(), vec![2, 2, 2]);
    }

    #[test]
    fn same_seed_same_split() {
        let m = manifest(&[(Emotion::Happy, 13), (Emotion::Sad, 9)]);
        assert_eq!(split_stratified(&m, 0.8, 3).unwrap(), split_stratified(&m, 0.8, 3).unwrap());
        assert_ne!(
            split_stratified(&m, 0.8, 3).unwrap().test,
            split_stratified(&m, 0.8, 4).unwrap().test
        );
    }

    #[test]
    fn emodb_anger_count() {
        let m = manifest(&[(Emotion::Angry, 127), (Emotion::Neutral, 79)]);
        let s = split_stratified(&m, 0.8, 0).unwrap();
        assert_eq!(s.train.class_counts()[1], 102);
        assert_eq!(s.test.class_counts()[1], 25);
        assert_eq!(train_count(10, 0.7), 7);
    }

    #[test]
    fn singleton_class_fails() {
        let m = manifest(&[(Emotion::Angry, 5), (Emotion::Sad, 1)]);
        assert!(matches!(split_stratified(&m, 0.8, 0), Err(Error::Stratify(_))));
        assert!(split_stratified(&manifest(&[(Emotion::Sad, 4)]), 1.0, 0).is_err());
    }

    #[test]
    fn speaker_split_keeps_speakers_apart() {
        let m = manifest(&[(Emotion::Happy, 20), (Emotion::Sad, 20)]);
        let s = split_by_speaker(&m, 0.8, 11).unwrap();
        let tr: HashSet<_> = s.train.entries().iter().map(|e| e.speaker.clone()).collect();
        let te: HashSet<_> = s.test.entries().iter().map(|e| e.speaker.clone()).collect();
        assert!(tr.is_disjoint(&te));
        assert_eq!(tr.len(), 4);
        assert_eq!(s.train.len() + s.test.len(), 40);
    }

    proptest! {
        #[test]
        fn split_is_partition(counts in prop::collection::vec(2usize..30, 1..6),
                              ratio in 0.05f64..0.95, seed in any::<u64>()) {
            let spec: Vec<_> = counts.iter().zip(Emotion::ALL).map(|(&n, e)| (e, n)).collect();
            let m = manifest(&spec);
            let s = split_stratified(&m, ratio, seed).unwrap();
            let tr: HashSet<_> = s.train.entries().iter().map(|e| e.path.clone()).collect();
            let te: HashSet<_> = s.test.entries().iter().map(|e| e.path.clone()).collect();
            prop_assert!(tr.is_disjoint(&te));
            prop_assert_eq!(tr.len() + te.len(), m.len());
            for (c, &n) in m.class_counts().iter().enumerate() {
                let t = s.test.class_counts()[c] as f64;
                prop_assert!((t - (1.0 - ratio) * n as f64).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
