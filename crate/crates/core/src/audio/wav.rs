//! RIFF/WAVE decoding and encoding (PCM16 and IEEE float32).

use std::path::Path;

use super::Waveform;
use crate::{Error, Result, Scalar};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes a WAV byte stream into a mono waveform. Stereo is averaged.
pub fn parse_wav<T: Scalar>(bytes: &[u8]) -> Result<Waveform<T>> {
    if bytes.len() < 12 {
        return Err(Error::Parse("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::Parse("missing RIFF tag".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Parse("missing WAVE tag".into()));
    }

    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        // Some writers leave the data size at 0 or oversize when streaming.
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Parse("fmt chunk truncated".into()));
                }
                let mut format = u16_at(body, 0);
                if format == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(Error::Parse("extensible fmt chunk truncated".into()));
                    }
                    format = u16_at(body, 24);
                }
                fmt = Some(Fmt {
                    format,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => {
                data = Some(body);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::Parse("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Parse("no data chunk".into()))?;
    if fmt.sample_rate == 0 {
        return Err(Error::Parse("sample rate is zero".into()));
    }
    if !(1..=2).contains(&fmt.channels) {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels",
            fmt.channels
        )));
    }
    let channels = fmt.channels as usize;

    let decoded: Vec<f64> = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {format} with {bits} bits per sample"
            )))
        }
    };

    let samples: Vec<T> = decoded
        .chunks_exact(channels)
        .map(|frame| T::of(frame.iter().sum::<f64>() / channels as f64))
        .collect();
    if samples.is_empty() {
        return Err(Error::Parse("data chunk holds no samples".into()));
    }
    Ok(Waveform::new(samples, fmt.sample_rate))
}

pub fn read_wav<T: Scalar>(path: &Path) -> Result<Waveform<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

/// Encodes a mono waveform. PCM16 rounds to the nearest step and saturates.
pub fn write_wav<T: Scalar>(w: &Waveform<T>, format: SampleFormat) -> Vec<u8> {
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = w.samples.len() * block_align as usize;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &w.samples {
        let s = s.to_f64_lossy();
        match format {
            SampleFormat::Pcm16 => {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stereo_pcm16(frames: &[(i16, i16)], rate: u32) -> Vec<u8> {
        let data_len = frames.len() * 4;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 4).to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for &(l, r) in frames {
            out.extend_from_slice(&l.to_le_bytes());
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    #[test]
    fn zero_second_of_audio() {
        let w = Waveform::new(vec![0.0f64; 16000], 16000);
        let parsed: Waveform<f64> = parse_wav(&write_wav(&w, SampleFormat::Pcm16)).unwrap();
        assert_eq!(parsed.sample_rate, 16000);
        assert_eq!(parsed.samples.len(), 16000);
        assert!(parsed.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_is_averaged() {
        let bytes = stereo_pcm16(&[(16384, -16384); 10], 8000);
        let w: Waveform<f64> = parse_wav(&bytes).unwrap();
        assert_eq!(w.samples.len(), 10);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sine_written_then_parsed_keeps_peak() {
        // Oracle: quantize the sine by hand and compare with what comes back.
        let n = 16000;
        let ints: Vec<i16> = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                (16384.0 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()).round() as i16
            })
            .collect();
        let w = Waveform::new(ints.iter().map(|&q| q as f64 / 32768.0).collect(), 16000);
        let parsed: Waveform<f64> = parse_wav(&write_wav(&w, SampleFormat::Pcm16)).unwrap();
        let peak = parsed.samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
        assert!((peak - 0.5).abs() <= 1.0 / 32768.0, "peak {peak}");
        for (q, s) in ints.iter().zip(&parsed.samples) {
            assert_eq!(*q as f64 / 32768.0, *s);
        }
    }

    #[test]
    fn float32_roundtrip_is_exact() {
        let w = Waveform::new(vec![0.25f32, -0.75, 0.125], 22050);
        let parsed: Waveform<f32> = parse_wav(&write_wav(&w, SampleFormat::Float32)).unwrap();
        assert_eq!(parsed, w);
    }

    #[test]
    fn malformed_and_unsupported() {
        assert!(matches!(parse_wav::<f32>(b"RIFX0000WAVE"), Err(Error::Parse(_))));
        assert!(matches!(parse_wav::<f32>(b"RIFF"), Err(Error::Parse(_))));
        let mut bytes = write_wav(&Waveform::new(vec![0.1f32; 4], 8000), SampleFormat::Pcm16);
        // flip the codec tag to A-law
        bytes[20] = 6;
        assert!(matches!(parse_wav::<f32>(&bytes), Err(Error::UnsupportedFormat(_))));
        let mut bytes = write_wav(&Waveform::new(vec![0.1f32; 4], 8000), SampleFormat::Pcm16);
        bytes[22] = 6;
        assert!(matches!(parse_wav::<f32>(&bytes), Err(Error::UnsupportedFormat(_))));
    }
}
