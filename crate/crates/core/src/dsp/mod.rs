//! Signal processing frontends: z-score normalization, fixed-length
//! clipping, STFT power spectra, mel filterbanks, log-mel and MFCC.

mod container;
mod dct;
mod fft;
mod frontend;
mod mel;
mod window;

pub use container::{read_features, write_features, features_to_csv, FEATURE_MAGIC, FEATURE_VERSION};
pub use dct::{dct2_ortho, dct_basis, DctPlan};
pub use fft::{fft_in_place, power_spectrum};
pub use frontend::{
    fix_length, frame_count, log_mel_from_fixed, log_mel_spectrogram, mfcc, normalize_zscore,
    summarize_mean, FeatureKind, FeatureMatrix, MfccConfig, PreprocessConfig, StftConfig,
};
pub use mel::{mel_filterbank, mel_inverse, mel_scale, MelConfig, MelFilterbank};
pub use window::hamming;
