//! Speech emotion recognition toolkit: WAV ingestion, log-mel and MFCC
//! frontends, a small neural engine for raw-waveform CNN/LSTM models,
//! classical baselines and an evaluation harness.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used in practice.

pub mod audio;
pub mod classical;
pub mod dsp;
mod error;
pub mod eval;
pub mod nn;
mod scalar;
pub mod selftest;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Waveform32 = audio::Waveform<f32>;
pub type Waveform64 = audio::Waveform<f64>;
pub type FeatureMatrix32 = dsp::FeatureMatrix<f32>;
pub type FeatureMatrix64 = dsp::FeatureMatrix<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Checkpoint32 = nn::Checkpoint<f32>;
pub type Checkpoint64 = nn::Checkpoint<f64>;
pub type FeatureSet32 = classical::FeatureSet<f32>;
pub type FeatureSet64 = classical::FeatureSet<f64>;
