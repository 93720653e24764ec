//! IDX image files (MNIST, FashionMNIST, KMNIST).
//!
//! Layout: big-endian magic `00 00 08 03` (unsigned byte, 3 dims), then
//! count, rows, cols as big-endian u32, then row-major pixel bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::{Dataset, DatasetTag};

pub const IDX_IMAGE_MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x03];
const HEADER_BYTES: usize = 16;

fn be_u32(b: &[u8]) -> usize {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize
}

/// Parses IDX image bytes; pixels are scaled by `1/255` into `[0, 1]`.
pub fn parse_idx<T: Scalar>(
    bytes: &[u8],
    count_limit: Option<usize>,
    name: &str,
) -> Result<Dataset<T>> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Length {
            context: name.into(),
            detail: format!("{} bytes is shorter than the 16-byte IDX header", bytes.len()),
        });
    }
    if bytes[..4] != IDX_IMAGE_MAGIC {
        return Err(Error::Magic {
            context: name.into(),
            expected: hex(&IDX_IMAGE_MAGIC),
            actual: hex(&bytes[..4]),
        });
    }
    let count = be_u32(&bytes[4..8]);
    let rows = be_u32(&bytes[8..12]);
    let cols = be_u32(&bytes[12..16]);
    let per_image = rows * cols;
    let needed = HEADER_BYTES + count * per_image;
    if bytes.len() < needed {
        return Err(Error::Length {
            context: name.into(),
            detail: format!(
                "header declares {count} images of {rows}x{cols} ({needed} bytes), file has {}",
                bytes.len()
            ),
        });
    }
    let take = count_limit.map_or(count, |l| l.min(count));
    let shape = Shape::new(rows, cols, 1);
    let items = bytes[HEADER_BYTES..HEADER_BYTES + take * per_image]
        .chunks_exact(per_image.max(1))
        .map(|px| Tensor::new(shape, px.iter().map(|&b| T::of(f64::from(b) / 255.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, DatasetTag::In, items)
}

pub fn load_idx<T: Scalar>(path: impl AsRef<Path>, count_limit: Option<usize>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes, count_limit, &path.display().to_string())
}

/// Encodes `H × W` byte images as an IDX image file.
pub fn encode_idx_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + images.len() * rows * cols);
    out.extend_from_slice(&IDX_IMAGE_MAGIC);
    for v in [images.len(), rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), rows * cols, "image byte count");
        out.extend_from_slice(img);
    }
    out
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ")
}
