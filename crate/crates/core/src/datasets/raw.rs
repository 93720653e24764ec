//! Raw tensor dump used to persist intermediate datasets.
//!
//! Layout: `b"RDRT"`, version byte, then item count, height, width and
//! channels as little-endian u32, then every value as a little-endian f32 in
//! item order. Values are stored at `f32`, so `f32` datasets round-trip
//! bit-exactly.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::{Dataset, DatasetTag};

pub const RAW_MAGIC: [u8; 4] = *b"RDRT";
pub const RAW_VERSION: u8 = 1;
const HEADER_BYTES: usize = 4 + 1 + 4 * 4;

pub fn encode_raw<T: Scalar>(d: &Dataset<T>) -> Vec<u8> {
    let s = d.shape();
    let mut out = Vec::with_capacity(HEADER_BYTES + d.len() * s.len() * 4);
    out.extend_from_slice(&RAW_MAGIC);
    out.push(RAW_VERSION);
    for v in [d.len(), s.height, s.width, s.channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for t in d.items() {
        for v in t.as_slice() {
            let v = v.to_f32().expect("finite scalar fits f32");
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_raw<T: Scalar>(bytes: &[u8], name: &str, tag: DatasetTag) -> Result<Dataset<T>> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Length {
            context: name.into(),
            detail: format!("{} bytes is shorter than the raw tensor header", bytes.len()),
        });
    }
    if bytes[..4] != RAW_MAGIC {
        return Err(Error::Magic {
            context: name.into(),
            expected: "RDRT".into(),
            actual: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    if bytes[4] != RAW_VERSION {
        return Err(Error::Version {
            context: name.into(),
            found: bytes[4],
            supported: RAW_VERSION,
        });
    }
    let dim = |i: usize| {
        let o = 5 + 4 * i;
        u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
    };
    let (n, shape) = (dim(0), Shape::new(dim(1), dim(2), dim(3)));
    let expected = HEADER_BYTES + n * shape.len() * 4;
    if bytes.len() != expected {
        return Err(Error::Length {
            context: name.into(),
            detail: format!("header declares {expected} bytes, file has {}", bytes.len()),
        });
    }
    let values = bytes[HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| T::of(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))));
    let per = shape.len().max(1);
    let mut items = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(per);
    for v in values {
        buf.push(v);
        if buf.len() == per {
            items.push(Tensor::new(shape, std::mem::replace(&mut buf, Vec::with_capacity(per)))?);
        }
    }
    Dataset::new(name, tag, items)
}

pub fn save_raw<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_raw(d)).map_err(|e| Error::io(path, e))
}

pub fn load_raw<T: Scalar>(path: impl AsRef<Path>, tag: DatasetTag) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    decode_raw(&bytes, &name, tag)
}
