//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!   magic `BVIT` | u32 version = 1 | u64 metadata length | UTF-8 JSON
//!   metadata | u32 tensor count | per tensor: u32 name length, name,
//!   u32 rank, u64 dims[rank], raw f32 little-endian values.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, ViTParams};

use super::TrainError;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"BVIT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub class_names: Vec<String>,
    /// Input normalization the weights were trained under.
    pub normalization: String,
    /// Epoch the tensors were snapshotted at (best validation epoch).
    pub epoch: usize,
    pub train_metrics: Option<MetricPair>,
    pub val_metrics: Option<MetricPair>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// A serialized model: metadata plus the full named-tensor table. Plain
/// data, safe to move across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(meta: CheckpointMeta, params: &ViTParams) -> Checkpoint {
        let tensors = params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                dims: t.shape().to_vec(),
                values: t.data().to_vec(),
            })
            .collect();
        Checkpoint { meta, tensors }
    }

    /// Reconstruct trainable parameters; shapes are validated against the
    /// stored config.
    pub fn into_params(&self) -> Result<ViTParams, TrainError> {
        let map: HashMap<String, (Vec<usize>, Vec<f32>)> = self
            .tensors
            .iter()
            .map(|t| (t.name.clone(), (t.dims.clone(), t.values.clone())))
            .collect();
        Ok(ViTParams::from_named(&self.meta.model, map)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], TrainError> {
        if self.offset + n > self.buf.len() {
            return Err(TrainError::CheckpointFormat {
                offset: self.offset as u64,
                reason: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.buf.len() - self.offset
                ),
            });
        }
        let slice = &self.buf[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> io::Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let meta = serde_json::to_vec(&ck.meta).expect("metadata serializes");
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&(ck.tensors.len() as u32).to_le_bytes())?;
    for t in &ck.tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
        for &d in &t.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut bytes = Vec::with_capacity(t.values.len() * 4);
        for &v in &t.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, TrainError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| TrainError::Io {
        path: "<stream>".into(),
        source: e,
    })?;
    parse_checkpoint(&buf)
}

pub fn parse_checkpoint(buf: &[u8]) -> Result<Checkpoint, TrainError> {
    let mut r = Reader { buf, offset: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(TrainError::CheckpointFormat {
            offset: 0,
            reason: format!("bad magic {magic:02x?}, expected `BVIT`"),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::CheckpointFormat {
            offset: 4,
            reason: format!("unsupported version {version}, expected {CHECKPOINT_VERSION}"),
        });
    }
    let meta_len = r.u64("metadata length")? as usize;
    let meta_offset = r.offset as u64;
    let meta_bytes = r.take(meta_len, "metadata")?;
    let meta: CheckpointMeta =
        serde_json::from_slice(meta_bytes).map_err(|e| TrainError::CheckpointFormat {
            offset: meta_offset,
            reason: format!("metadata is not valid JSON: {e}"),
        })?;

    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name_offset = r.offset as u64;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|e| TrainError::CheckpointFormat {
                offset: name_offset,
                reason: format!("tensor {i} name is not UTF-8: {e}"),
            })?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64("dim")? as usize);
        }
        let numel: usize = dims.iter().product();
        if dims.contains(&0) {
            return Err(TrainError::CheckpointFormat {
                offset: name_offset,
                reason: format!("tensor `{name}` declares a zero dimension {dims:?}"),
            });
        }
        let data_offset = r.offset as u64;
        let bytes = r.take(numel * 4, "tensor values")?;
        let mut values = Vec::with_capacity(numel);
        for chunk in bytes.chunks_exact(4) {
            values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        if values.len() != numel {
            return Err(TrainError::CheckpointFormat {
                offset: data_offset,
                reason: format!(
                    "tensor `{name}` holds {} values, dims {dims:?} need {numel}",
                    values.len()
                ),
            });
        }
        tensors.push(NamedTensor { name, dims, values });
    }
    if r.offset != buf.len() {
        return Err(TrainError::CheckpointFormat {
            offset: r.offset as u64,
            reason: format!("{} trailing bytes after tensor table", buf.len() - r.offset),
        });
    }
    Ok(Checkpoint { meta, tensors })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), TrainError> {
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, ck).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    fs::write(path, bytes).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let bytes = fs::read(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_checkpoint(&bytes)
}
