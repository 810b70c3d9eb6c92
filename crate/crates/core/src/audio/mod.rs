//! Audio ingestion: WAV decoding, resampling, corpus scanning and
//! train/test splitting.

mod corpus;
mod resample;
mod split;
mod wav;

pub use corpus::{scan_corpus, CorpusConvention, DatasetManifest, Emotion, EmotionLabel, ManifestEntry};
pub use resample::resample_linear;
pub use split::{split_by_speaker, split_stratified, DataSplit, SplitMode};
pub use wav::{parse_wav, read_wav, write_wav, SampleFormat};

use crate::Scalar;

/// Rate every file is brought to on load.
pub const CANONICAL_RATE: u32 = 16_000;

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Reads a WAV file and resamples it to [`CANONICAL_RATE`].
    pub fn load(path: &std::path::Path) -> crate::Result<Self> {
        let w = read_wav(path)?;
        Ok(resample_linear(&w, CANONICAL_RATE))
    }
}
