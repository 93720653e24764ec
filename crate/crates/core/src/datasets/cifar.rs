//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! the R, G and B planes (1024 bytes each, row-major). Labels are dropped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::{Dataset, DatasetTag};

pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * PLANE;
const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;

/// Decodes records from one batch, appending at most `limit` tensors.
fn decode_into<T: Scalar>(
    bytes: &[u8],
    context: &str,
    limit: usize,
    out: &mut Vec<Tensor<T>>,
) -> Result<()> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(Error::Length {
            context: context.into(),
            detail: format!(
                "{} bytes is not a multiple of the {CIFAR_RECORD_BYTES}-byte record size",
                bytes.len()
            ),
        });
    }
    let shape = Shape::new(SIDE, SIDE, 3);
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        if out.len() >= limit {
            break;
        }
        let planes = &rec[1..];
        let mut data = Vec::with_capacity(3 * PLANE);
        for p in 0..PLANE {
            for c in 0..3 {
                data.push(T::of(f64::from(planes[c * PLANE + p]) / 255.0));
            }
        }
        out.push(Tensor::new(shape, data)?);
    }
    Ok(())
}

/// Parses in-memory batches in order, as [`load_cifar10`] does for files.
pub fn parse_cifar10<T: Scalar>(
    batches: &[&[u8]],
    count_limit: Option<usize>,
    name: &str,
) -> Result<Dataset<T>> {
    let limit = count_limit.unwrap_or(usize::MAX);
    let mut items = Vec::new();
    for (i, b) in batches.iter().enumerate() {
        decode_into(b, &format!("{name}[{i}]"), limit, &mut items)?;
    }
    Dataset::new(name, DatasetTag::In, items)
}

/// Concatenates batch files in argument order.
pub fn load_cifar10<T: Scalar, P: AsRef<Path>>(
    batch_paths: &[P],
    count_limit: Option<usize>,
) -> Result<Dataset<T>> {
    let limit = count_limit.unwrap_or(usize::MAX);
    let mut items = Vec::new();
    for p in batch_paths {
        let p = p.as_ref();
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        decode_into(&bytes, &p.display().to_string(), limit, &mut items)?;
    }
    let name = batch_paths
        .first()
        .map(|p| p.as_ref().display().to_string())
        .unwrap_or_else(|| "cifar10".into());
    Dataset::new(name, DatasetTag::In, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: impl Fn(usize, usize) -> u8) -> Vec<u8> {
        let mut r = vec![label];
        for c in 0..3 {
            for p in 0..PLANE {
                r.push(fill(c, p));
            }
        }
        r
    }

    #[test]
    fn constant_record() {
        let rec = record(7, |_, _| 128);
        let d = parse_cifar10::<f32>(&[&rec], None, "c").unwrap();
        assert_eq!(d.shape(), Shape::new(32, 32, 3));
        assert!(d.get(0).as_slice().iter().all(|&v| v == (128.0f64 / 255.0) as f32));
    }

    #[test]
    fn planes_are_r_then_g_then_b() {
        let rec = record(0, |c, p| if p == 33 { [10, 20, 30][c] } else { 0 });
        let d = parse_cifar10::<f64>(&[&rec], None, "c").unwrap();
        let t = d.get(0);
        assert_eq!(t.get(1, 1, 0), 10.0 / 255.0);
        assert_eq!(t.get(1, 1, 1), 20.0 / 255.0);
        assert_eq!(t.get(1, 1, 2), 30.0 / 255.0);
    }

    #[test]
    fn batches_concatenate_in_order() {
        let a: Vec<u8> = [record(0, |_, _| 1), record(0, |_, _| 2)].concat();
        let b = record(1, |_, _| 3);
        let d = parse_cifar10::<f32>(&[&a, &b], None, "c").unwrap();
        let firsts: Vec<f32> = d.items().iter().map(|t| t.as_slice()[0] * 255.0).collect();
        assert_eq!(firsts.iter().map(|v| v.round() as u8).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(parse_cifar10::<f32>(&[&a, &b], Some(2), "c").unwrap().len(), 2);
    }

    #[test]
    fn ragged_size_rejected() {
        let rec = record(0, |_, _| 0);
        assert!(matches!(
            parse_cifar10::<f32>(&[&rec[..3000]], None, "c"),
            Err(Error::Length { .. })
        ));
    }
}
