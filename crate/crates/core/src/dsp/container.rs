//! `SERF` feature dumps: magic, u32 version, u32 kind tag, u32 frames,
//! u32 coeffs, then little-endian f32 values row-major.

use super::{FeatureKind, FeatureMatrix};
use crate::{Error, Result, Scalar};

pub const FEATURE_MAGIC: &[u8; 4] = b"SERF";
pub const FEATURE_VERSION: u32 = 1;

pub fn write_features<T: Scalar>(fm: &FeatureMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + fm.values.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&fm.kind.tag().to_le_bytes());
    out.extend_from_slice(&(fm.frames as u32).to_le_bytes());
    out.extend_from_slice(&(fm.coeffs as u32).to_le_bytes());
    for v in &fm.values {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

/// The frame rate is not stored; `frame_rate` is supplied by the caller
/// (100 frames/s for the default STFT).
pub fn read_features<T: Scalar>(bytes: &[u8], frame_rate: f64) -> Result<FeatureMatrix<T>> {
    if bytes.len() < 20 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::Parse("not a SERF feature file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedFormat(format!("SERF version {version}")));
    }
    let kind = FeatureKind::from_tag(word(1))
        .ok_or_else(|| Error::Parse(format!("unknown feature kind tag {}", word(1))))?;
    let (frames, coeffs) = (word(2) as usize, word(3) as usize);
    let payload = &bytes[20..];
    if payload.len() != frames * coeffs * 4 {
        return Err(Error::Parse(format!(
            "payload holds {} bytes, header promises {frames}x{coeffs} floats",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Ok(FeatureMatrix {
        values,
        frames,
        coeffs,
        frame_rate,
        kind,
    })
}

/// One line per frame, comma-separated.
pub fn features_to_csv<T: Scalar>(fm: &FeatureMatrix<T>) -> String {
    let mut out = String::new();
    for f in 0..fm.frames {
        let row: Vec<String> = fm.row(f).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn roundtrip(frames in 1usize..6, coeffs in 1usize..6, seed in any::<u32>()) {
            let values: Vec<f32> = (0..frames * coeffs)
                .map(|i| ((seed as usize + i * 7919) % 1000) as f32 / 37.0 - 10.0)
                .collect();
            let fm = FeatureMatrix { values, frames, coeffs, frame_rate: 100.0, kind: FeatureKind::Mfcc };
            let bytes = write_features(&fm);
            prop_assert_eq!(&bytes[..4], b"SERF");
            let back: FeatureMatrix<f32> = read_features(&bytes, 100.0).unwrap();
            prop_assert_eq!(&back, &fm);
            prop_assert_eq!(write_features(&back), bytes);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_features::<f32>(b"SERM0000", 100.0).is_err());
        let fm = FeatureMatrix { values: vec![1.0f32; 4], frames: 2, coeffs: 2, frame_rate: 100.0, kind: FeatureKind::Logmel };
        let mut bytes = write_features(&fm);
        bytes.pop();
        assert!(read_features::<f32>(&bytes, 100.0).is_err());
        assert_eq!(features_to_csv(&fm), "1,1\n1,1\n");
    }
}
