//! Synthetic corpora shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::audio::{write_wav, DatasetManifest, Emotion, ManifestEntry, SampleFormat};
use ser_core::Waveform32;

pub const RATE: u32 = 16_000;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A sine at `hz` with random phase and amplitude plus white Gaussian noise
/// at `snr_db` relative to the tone's power.
pub fn noisy_tone(hz: f64, seconds: f64, snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = (seconds * RATE as f64).round() as usize;
    let amp: f64 = rng.gen_range(0.3..0.9);
    let phase: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let noise_std = (amp * amp / 2.0 / 10f64.powf(snr_db / 10.0)).sqrt();
    (0..n)
        .map(|i| {
            let t = i as f64 / RATE as f64;
            (amp * (2.0 * std::f64::consts::PI * hz * t + phase).sin() + noise_std * gaussian(rng)) as f32
        })
        .collect()
}

/// Writes `clips` tone files per class under `dir` and returns their
/// manifest. Speakers cycle through four ids.
pub fn tone_corpus(
    dir: &Path,
    classes: &[(Emotion, f64)],
    clips: usize,
    seconds: f64,
    snr_db: f64,
    seed: u64,
) -> DatasetManifest {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (c, &(emotion, hz)) in classes.iter().enumerate() {
        for i in 0..clips {
            let samples = noisy_tone(hz, seconds, snr_db, &mut rng);
            let path = dir.join(format!("c{c}_{i:03}.wav"));
            std::fs::write(&path, write_wav(&Waveform32::new(samples, RATE), SampleFormat::Float32)).unwrap();
            entries.push(ManifestEntry {
                path,
                emotion,
                speaker: format!("s{}", i % 4),
            });
        }
    }
    DatasetManifest::from_entries(entries).unwrap()
}

pub const FOUR_TONES: [(Emotion, f64); 4] = [
    (Emotion::Neutral, 300.0),
    (Emotion::Happy, 600.0),
    (Emotion::Sad, 1200.0),
    (Emotion::Angry, 2400.0),
];
