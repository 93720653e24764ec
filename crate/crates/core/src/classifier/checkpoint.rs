//! Model checkpoints.
//!
//! Layout: `b"RDRM"`, version byte `0x01`, u32 descriptor length, UTF-8 JSON
//! architecture descriptor, then for each layer its weight and bias arrays,
//! then the momentum buffers in the same order. Every array is a u32 element
//! count followed by little-endian f32 values; all integers little-endian.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::arch::ArchitectureSpec;
use super::model::{LayerParams, Model};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RDRM";
pub const CHECKPOINT_VERSION: u8 = 0x01;

pub fn encode_checkpoint(model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    let desc = model.spec().descriptor();
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    for set in [model.params(), model.momentum()] {
        for p in set {
            for arr in [&p.weight, &p.bias] {
                out.extend_from_slice(&(arr.len() as u32).to_le_bytes());
                for v in arr.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Length {
                context: "checkpoint".into(),
                detail: format!("truncated while reading {what} at byte {}", self.pos),
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32_array(&mut self, what: &str) -> Result<Vec<f32>> {
        let n = self.u32(what)?;
        let raw = self.take(n.saturating_mul(4), what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Decodes a whole checkpoint; nothing is returned unless every byte parses.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Magic {
            context: "checkpoint".into(),
            expected: "RDRM".into(),
            actual: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.take(1, "version")?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            context: "checkpoint".into(),
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let len = r.u32("descriptor length")?;
    let desc = std::str::from_utf8(r.take(len, "descriptor")?).map_err(|e| Error::Format {
        context: "checkpoint descriptor".into(),
        detail: e.to_string(),
    })?;
    let spec = ArchitectureSpec::from_descriptor(desc)?;
    let mut read_set = |label: &str| -> Result<Vec<LayerParams<f32>>> {
        (0..spec.layers.len())
            .map(|i| {
                Ok(LayerParams {
                    weight: r.f32_array(&format!("layer {i} {label} weights"))?,
                    bias: r.f32_array(&format!("layer {i} {label} biases"))?,
                })
            })
            .collect()
    };
    let params = read_set("parameter")?;
    let momentum = read_set("momentum")?;
    if r.pos != bytes.len() {
        return Err(Error::Length {
            context: "checkpoint".into(),
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Model::from_parts(spec, params, momentum)
}

/// Writes to a sibling temp file and renames, so readers never see a partial file.
pub fn save_checkpoint(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("rdrm.tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_checkpoint(model))?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
