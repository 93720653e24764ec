//! Image-space transforms for local base samples and spread noise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Crop sizes available to [`local_sample`] for square images of one size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CropGrid {
    source_size: usize,
    allowed_sizes: Vec<usize>,
}

impl CropGrid {
    /// Sizes must be strictly increasing and lie in `2..=source_size`.
    pub fn new(source_size: usize, allowed_sizes: Vec<usize>) -> Result<Self> {
        if allowed_sizes.is_empty() {
            return Err(Error::Config("crop grid has no sizes".into()));
        }
        if allowed_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "crop sizes {allowed_sizes:?} are not strictly increasing"
            )));
        }
        if let Some(s) = allowed_sizes.iter().find(|&&s| s < 2 || s > source_size) {
            return Err(Error::Config(format!(
                "crop size {s} outside 2..={source_size}"
            )));
        }
        Ok(Self {
            source_size,
            allowed_sizes,
        })
    }

    /// Even sizes from half the image up to two pixels short of it:
    /// `{14, 16, ..., 26}` for 28, `{16, 18, ..., 30}` for 32.
    pub fn default_for(source_size: usize) -> Result<Self> {
        let lo = source_size.div_ceil(2).max(2);
        let lo = lo + lo % 2;
        let sizes: Vec<usize> = (lo..=source_size.saturating_sub(2)).step_by(2).collect();
        Self::new(source_size, sizes)
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn allowed_sizes(&self) -> &[usize] {
        &self.allowed_sizes
    }
}

/// Square `size × size` sub-block with the top-left corner uniform over all
/// valid positions (row drawn first, then column).
pub fn random_crop<T: Scalar>(img: &Tensor<T>, size: usize, rng: &mut RngStream) -> Result<Tensor<T>> {
    let s = img.shape();
    if size == 0 || size > s.height || size > s.width {
        return Err(Error::Dimension(format!("crop size {size} does not fit image {s}")));
    }
    let y0 = rng.below(s.height - size + 1);
    let x0 = rng.below(s.width - size + 1);
    Ok(crop_at(img, y0, x0, size))
}

pub(crate) fn crop_at<T: Scalar>(img: &Tensor<T>, y0: usize, x0: usize, size: usize) -> Tensor<T> {
    let s = img.shape();
    let c = s.channels;
    let mut data = Vec::with_capacity(size * size * c);
    let src = img.as_slice();
    for y in y0..y0 + size {
        let row = (y * s.width + x0) * c;
        data.extend_from_slice(&src[row..row + size * c]);
    }
    Tensor::from_parts_unchecked(Shape::new(size, size, c), data)
}

/// Half-pixel source coordinate for output index `dst`, clamped to the image.
fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - i0 as f64)
}

#[inline]
fn lerp<T: Scalar>(a: T, b: T, f: T) -> T {
    (a + (b - a) * f).max(a.min(b)).min(a.max(b))
}

/// Bilinear resize to `out_h × out_w` with half-pixel centers:
/// `src = (dst + 0.5) · S/T − 0.5`, clamped to `[0, S − 1]`.
pub fn bilinear_resize_to<T: Scalar>(img: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Dimension("resize target must be at least 1".into()));
    }
    let s = img.shape();
    let c = s.channels;
    let cols: Vec<_> = (0..out_w).map(|x| source_coord(x, s.width, out_w)).collect();
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for y in 0..out_h {
        let (y0, y1, fy) = source_coord(y, s.height, out_h);
        let fy = T::of(fy);
        for &(x0, x1, fx) in &cols {
            let fx = T::of(fx);
            for ch in 0..c {
                let top = lerp(img.get(y0, x0, ch), img.get(y0, x1, ch), fx);
                let bottom = lerp(img.get(y1, x0, ch), img.get(y1, x1, ch), fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Ok(Tensor::from_parts_unchecked(Shape::new(out_h, out_w, c), data))
}

/// Square bilinear resize to `target × target`.
pub fn bilinear_resize<T: Scalar>(img: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    bilinear_resize_to(img, target, target)
}

/// Crop at a size drawn uniformly from `grid`, then resize back; returns the
/// drawn crop size alongside the sample.
pub fn local_sample_with_size<T: Scalar>(
    img: &Tensor<T>,
    grid: &CropGrid,
    rng: &mut RngStream,
) -> Result<(Tensor<T>, usize)> {
    let s = img.shape();
    if s.height != s.width || s.height != grid.source_size {
        return Err(Error::Dimension(format!(
            "local sampling expects {0}x{0} images, got {s}",
            grid.source_size
        )));
    }
    let size = grid.allowed_sizes[rng.below(grid.allowed_sizes.len())];
    let crop = random_crop(img, size, rng)?;
    Ok((bilinear_resize(&crop, grid.source_size)?, size))
}

pub fn local_sample<T: Scalar>(img: &Tensor<T>, grid: &CropGrid, rng: &mut RngStream) -> Result<Tensor<T>> {
    local_sample_with_size(img, grid, rng).map(|(t, _)| t)
}

/// Adds i.i.d. `N(0, sigma²)` to every element in place. No clamping.
pub fn add_noise_in_place<T: Scalar>(img: &mut Tensor<T>, sigma: f64, rng: &mut RngStream) -> Result<()> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(());
    }
    let data = img.data_mut();
    for v in data.iter_mut() {
        *v += T::of(sigma * rng.normal());
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spread noise produced a non-finite pixel".into()));
    }
    Ok(())
}

/// Spread noise for a batch: `x + ε`, `ε ~ N(0, σ² I)` per pixel, unclamped.
/// `sigma == 0` returns bit-identical copies and draws nothing.
pub fn add_spread_noise<T: Scalar>(
    batch: &[Tensor<T>],
    sigma: f64,
    rng: &mut RngStream,
) -> Result<Vec<Tensor<T>>> {
    check_sigma(sigma)?;
    batch
        .iter()
        .map(|t| {
            let mut t = t.clone();
            add_noise_in_place(&mut t, sigma, rng)?;
            Ok(t)
        })
        .collect()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise sigma {sigma} must be finite and >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn ramp(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(Shape::new(h, w, 1), |y, x, _| (y * w + x) as f64).unwrap()
    }

    #[test]
    fn default_grids_match_listing() {
        assert_eq!(CropGrid::default_for(28).unwrap().allowed_sizes(), &[14, 16, 18, 20, 22, 24, 26]);
        assert_eq!(
            CropGrid::default_for(32).unwrap().allowed_sizes(),
            &[16, 18, 20, 22, 24, 26, 28, 30]
        );
    }

    #[test]
    fn grid_validation() {
        assert!(CropGrid::new(28, vec![16, 14]).is_err());
        assert!(CropGrid::new(28, vec![1, 14]).is_err());
        assert!(CropGrid::new(28, vec![30]).is_err());
        assert!(CropGrid::new(28, vec![]).is_err());
        assert!(CropGrid::new(28, vec![28]).is_ok());
    }

    #[test]
    fn full_size_crop_is_identity() {
        let img = ramp(5, 5);
        assert_eq!(random_crop(&img, 5, &mut seeded_rng(0)).unwrap(), img);
    }

    #[test]
    fn crop_of_constant_is_constant() {
        let img = Tensor::constant(Shape::new(6, 6, 3), 0.25f32).unwrap();
        let c = random_crop(&img, 3, &mut seeded_rng(1)).unwrap();
        assert_eq!(c.shape(), Shape::new(3, 3, 3));
        assert!(c.as_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn crop_is_one_of_enumerated_blocks() {
        let img = ramp(4, 4);
        let blocks: Vec<Tensor<f64>> = (0..3)
            .flat_map(|y| (0..3).map(move |x| (y, x)))
            .map(|(y, x)| {
                Tensor::from_fn(Shape::new(2, 2, 1), |dy, dx, _| img.get(y + dy, x + dx, 0)).unwrap()
            })
            .collect();
        let mut rng = seeded_rng(2);
        let mut hit = [false; 9];
        for _ in 0..500 {
            let c = random_crop(&img, 2, &mut rng).unwrap();
            let k = blocks.iter().position(|b| *b == c).expect("crop must be an exact sub-block");
            hit[k] = true;
        }
        assert!(hit.iter().all(|&h| h), "every position reachable");
    }

    #[test]
    fn oversized_crop_rejected() {
        assert!(matches!(random_crop(&ramp(3, 3), 4, &mut seeded_rng(0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn resize_same_size_is_exact_identity() {
        let img = Tensor::from_fn(Shape::new(7, 7, 2), |y, x, c| (y as f32 * 0.37 + x as f32 * 0.11) / (c + 1) as f32).unwrap();
        assert_eq!(bilinear_resize(&img, 7).unwrap(), img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Tensor::constant(Shape::new(5, 5, 1), 0.3f32).unwrap();
        let out = bilinear_resize(&img, 13).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn resize_half_pixel_row_pattern() {
        // [0, 2] upscaled 2 -> 4: src = (dst+0.5)/2 - 0.5 = -0.25, 0.25, 0.75, 1.25,
        // clamped to [0,1] gives weights 0, 0.25, 0.75, 1.
        let row = Tensor::new(Shape::new(1, 2, 1), vec![0.0f64, 2.0]).unwrap();
        let out = bilinear_resize_to(&row, 1, 4).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.5, 1.5, 2.0]);
        let square = Tensor::from_fn(Shape::new(2, 2, 1), |_, x, _| 2.0 * x as f64).unwrap();
        let out = bilinear_resize(&square, 4).unwrap();
        for y in 0..4 {
            let r: Vec<f64> = (0..4).map(|x| out.get(y, x, 0)).collect();
            assert_eq!(r, vec![0.0, 0.5, 1.5, 2.0]);
        }
    }

    #[test]
    fn local_sample_identity_grid() {
        let img = ramp(6, 6);
        let grid = CropGrid::new(6, vec![6]).unwrap();
        assert_eq!(local_sample(&img, &grid, &mut seeded_rng(3)).unwrap(), img);
    }

    #[test]
    fn local_sample_constant_and_shape() {
        let img = Tensor::constant(Shape::new(28, 28, 1), 0.7f32).unwrap();
        let grid = CropGrid::default_for(28).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let out = local_sample(&img, &grid, &mut rng).unwrap();
            assert_eq!(out.shape(), img.shape());
            assert!(out.as_slice().iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn local_sample_crop_sizes_uniform() {
        let img = Tensor::constant(Shape::new(28, 28, 1), 0.0f32).unwrap();
        let grid = CropGrid::default_for(28).unwrap();
        let mut rng = seeded_rng(5);
        let n = 10_000;
        let k = grid.allowed_sizes().len();
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            let (out, size) = local_sample_with_size(&img, &grid, &mut rng).unwrap();
            assert_eq!(out.shape(), Shape::new(28, 28, 1));
            counts[grid.allowed_sizes().iter().position(|&s| s == size).unwrap()] += 1;
        }
        let p = 1.0 / k as f64;
        let expected = n as f64 * p;
        let three_sigma = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() <= three_sigma, "count {c}, expected {expected}");
        }
    }

    #[test]
    fn local_sample_wrong_size_rejected() {
        let grid = CropGrid::default_for(28).unwrap();
        assert!(local_sample(&ramp(32, 32), &grid, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn zero_noise_is_bit_identity() {
        let batch = vec![ramp(3, 3).cast::<f32>(), Tensor::constant(Shape::new(3, 3, 1), -0.0f32).unwrap()];
        let out = add_spread_noise(&batch, 0.0, &mut seeded_rng(0)).unwrap();
        for (a, b) in batch.iter().zip(&out) {
            let bits = |t: &Tensor<f32>| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn noise_residual_std() {
        let img = Tensor::constant(Shape::new(100, 100, 1), 0.5f64).unwrap();
        let batch = vec![img.clone(); 10];
        let out = add_spread_noise(&batch, 0.1, &mut seeded_rng(6)).unwrap();
        let res: Vec<f64> = out.iter().flat_map(|t| t.as_slice().iter().map(|v| v - 0.5)).collect();
        let n = res.len() as f64;
        let mean = res.iter().sum::<f64>() / n;
        let std = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.098..=0.102).contains(&std), "std {std}");
    }

    #[test]
    fn noise_is_seeded_and_unclamped() {
        let batch = vec![Tensor::constant(Shape::new(8, 8, 1), 1.0f32).unwrap()];
        let a = add_spread_noise(&batch, 0.1, &mut seeded_rng(7)).unwrap();
        let b = add_spread_noise(&batch, 0.1, &mut seeded_rng(7)).unwrap();
        assert_eq!(a, b);
        assert!(a[0].max_value() > 1.0);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(add_spread_noise(&[ramp(2, 2)], -0.1, &mut seeded_rng(0)).is_err());
    }
}
