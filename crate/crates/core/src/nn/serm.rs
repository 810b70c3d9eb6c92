//! "SERM" model container: magic, version, length-prefixed JSON header and
//! a list of named little-endian f32 tensors.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::model::{AdamState, Checkpoint, NamedTensor, Network, RngState};
use super::{ArchConfig, Tensor};
use crate::{Error, Result, Scalar};

pub const MODEL_MAGIC: &[u8; 4] = b"SERM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn from_tensor<T: Scalar>(name: impl Into<String>, t: &Tensor<T>) -> Self {
        Self {
            name: name.into(),
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect(),
        }
    }

    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        Tensor::from_vec(&self.shape, self.data.iter().map(|&v| T::of(v as f64)).collect())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit the container")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_serm<H: Serialize>(header: &H, tensors: &[RawTensor]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + tensors.iter().map(|t| t.data.len() * 4 + 64).sum::<usize>());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    put_u32(&mut out, tensors.len())?;
    for t in tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::shape(t.name.clone(), "shape does not match data length"));
        }
        put_u32(&mut out, t.name.len())?;
        out.extend_from_slice(t.name.as_bytes());
        put_u32(&mut out, t.shape.len())?;
        for &d in &t.shape {
            put_u32(&mut out, d)?;
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Parse(format!("model file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_serm<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<RawTensor>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(Error::Parse("not a SERM model file".into()));
    }
    let version = r.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedFormat(format!("model version {version}")));
    }
    let hlen = r.u32()?;
    let header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| Error::Parse(format!("model header: {e}")))?;
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let nlen = r.u32()?;
        let name = String::from_utf8(r.take(nlen)?.to_vec())
            .map_err(|_| Error::Parse("tensor name is not UTF-8".into()))?;
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Parse(format!("tensor {name} too large")))?;
        let data = r
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(RawTensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse(format!("{} trailing bytes in model file", bytes.len() - r.pos)));
    }
    Ok((header, tensors))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetHeader {
    model: String,
    arch: ArchConfig,
    adam_step: u64,
    rng: RngState,
    #[serde(default)]
    labels: Vec<String>,
}

const NET_MODEL: &str = "neural";

/// Peeks at the `model` field of a SERM header.
pub fn model_kind(bytes: &[u8]) -> Result<String> {
    #[derive(Deserialize)]
    struct Peek {
        model: String,
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(Error::Parse("not a SERM model file".into()));
    }
    r.u32()?;
    let hlen = r.u32()?;
    let peek: Peek = serde_json::from_slice(r.take(hlen)?).map_err(|e| Error::Parse(format!("model header: {e}")))?;
    Ok(peek.model)
}

impl<T: Scalar> Checkpoint<T> {
    /// Serializes in single precision.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = NetHeader {
            model: NET_MODEL.into(),
            arch: self.arch.clone(),
            adam_step: self.optimizer.step,
            rng: self.rng.clone(),
            labels: self.labels.clone(),
        };
        let mut tensors = Vec::new();
        for p in &self.params {
            tensors.push(RawTensor::from_tensor(format!("param/{}", p.name), &p.tensor));
        }
        for b in &self.buffers {
            tensors.push(RawTensor::from_tensor(format!("buffer/{}", b.name), &b.tensor));
        }
        for (p, m) in self.params.iter().zip(&self.optimizer.m) {
            tensors.push(RawTensor::from_tensor(format!("adam_m/{}", p.name), m));
        }
        for (p, v) in self.params.iter().zip(&self.optimizer.v) {
            tensors.push(RawTensor::from_tensor(format!("adam_v/{}", p.name), v));
        }
        encode_serm(&header, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, raw): (NetHeader, Vec<RawTensor>) = decode_serm(bytes)?;
        if header.model != NET_MODEL {
            return Err(Error::UnsupportedFormat(format!("model kind {:?}", header.model)));
        }
        let net = Network::new(&header.arch)?;
        let params_layout = net.parameter_layout();
        let buffer_layout = net.buffer_layout();
        let mut it = raw.into_iter();
        let mut take = |prefix: &str, layout: &[(String, Vec<usize>)]| -> Result<Vec<NamedTensor<T>>> {
            layout
                .iter()
                .map(|(name, shape)| {
                    let want = format!("{prefix}/{name}");
                    let t = it
                        .next()
                        .ok_or_else(|| Error::Parse(format!("missing tensor {want}")))?;
                    if t.name != want || &t.shape != shape {
                        return Err(Error::shape(
                            name.clone(),
                            format!("expected {want} {shape:?}, found {} {:?}", t.name, t.shape),
                        ));
                    }
                    Ok(NamedTensor {
                        name: name.clone(),
                        tensor: t.to_tensor()?,
                    })
                })
                .collect()
        };
        let params = take("param", &params_layout)?;
        let buffers = take("buffer", &buffer_layout)?;
        let m = take("adam_m", &params_layout)?.into_iter().map(|n| n.tensor).collect();
        let v = take("adam_v", &params_layout)?.into_iter().map(|n| n.tensor).collect();
        if it.next().is_some() {
            return Err(Error::Parse("unexpected extra tensors".into()));
        }
        Ok(Self {
            arch: header.arch,
            params,
            buffers,
            optimizer: AdamState {
                step: header.adam_step,
                m,
                v,
            },
            rng: header.rng,
            labels: header.labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_parameters;

    #[test]
    fn byte_exact_roundtrip() {
        let arch = ArchConfig::small_raw_cnn().with_classes(4);
        let mut ck: Checkpoint<f32> = init_parameters(&arch, 7).unwrap();
        ck.labels = vec!["angry".into(), "sad".into(), "happy".into(), "neutral".into()];
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"SERM");
        let back = Checkpoint::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(model_kind(&bytes).unwrap(), "neural");
    }

    #[test]
    fn corrupt_files_rejected() {
        let arch = ArchConfig::small_raw_cnn();
        let bytes = init_parameters::<f32>(&arch, 0).unwrap().to_bytes().unwrap();
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::<f32>::from_bytes(b"SERF0000").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::<f32>::from_bytes(&extra).is_err());
    }

    #[test]
    fn generic_container() {
        let t = vec![RawTensor {
            name: "w".into(),
            shape: vec![2, 2],
            data: vec![1.0, -2.0, 0.5, f32::MAX],
        }];
        let bytes = encode_serm(&serde_json::json!({"model": "x"}), &t).unwrap();
        let (h, back): (serde_json::Value, _) = decode_serm(&bytes).unwrap();
        assert_eq!(h["model"], "x");
        assert_eq!(back, t);
    }
}
