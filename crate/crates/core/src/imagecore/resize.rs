use super::{BinaryMask, Grid, Image};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Bilinear,
    Nearest,
}

/// Source index for destination index `d` under pixel-center alignment:
/// `floor((d + 0.5) * src / dst)`, in exact integer arithmetic.
#[inline]
fn nearest_index(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

pub(crate) fn resize_plane_nearest<V: Copy>(src: &[V], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<V> {
    let cols: Vec<usize> = (0..dw).map(|x| nearest_index(x, sw, dw)).collect();
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let row = &src[nearest_index(y, sh, dh) * sw..][..sw];
        out.extend(cols.iter().map(|&c| row[c]));
    }
    out
}

/// Sample position, lower neighbour, upper neighbour and fractional weight.
fn bilinear_taps<T: Scalar>(d: usize, src: usize, dst: usize) -> (usize, usize, T) {
    let scale = src as f64 / dst as f64;
    let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, T::lit(pos - lo as f64))
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
///
/// Interpolates as `a + f * (b - a)`, so constant inputs stay bit-identical.
pub(crate) fn resize_plane_bilinear<T: Scalar>(src: &[T], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<T> {
    let xs: Vec<(usize, usize, T)> = (0..dw).map(|x| bilinear_taps(x, sw, dw)).collect();
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let (y0, y1, fy) = bilinear_taps::<T>(y, sh, dh);
        let top = &src[y0 * sw..][..sw];
        let bot = &src[y1 * sw..][..sw];
        for &(x0, x1, fx) in &xs {
            let t = top[x0] + fx * (top[x1] - top[x0]);
            let b = bot[x0] + fx * (bot[x1] - bot[x0]);
            out.push(t + fy * (b - t));
        }
    }
    out
}

/// Resizes every channel to `width` x `height`.
pub fn resize<T: Scalar>(img: &Image<T>, width: usize, height: usize, mode: ResizeMode) -> Result<Image<T>> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension(width, height));
    }
    let (sw, sh) = (img.width(), img.height());
    let mut data = Vec::with_capacity(width * height * img.channels());
    for ch in 0..img.channels() {
        let plane = img.plane(ch);
        data.extend(match mode {
            ResizeMode::Bilinear => resize_plane_bilinear(plane, sw, sh, width, height),
            ResizeMode::Nearest => resize_plane_nearest(plane, sw, sh, width, height),
        });
    }
    Ok(Image::from_raw_clamped(width, height, img.channels(), data))
}

/// Nearest-neighbour mask resize (labels are never interpolated).
pub fn resize_mask(mask: &BinaryMask, width: usize, height: usize) -> Result<BinaryMask> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension(width, height));
    }
    if width == mask.width() && height == mask.height() {
        return Ok(mask.clone());
    }
    let data = resize_plane_nearest(mask.data(), mask.width(), mask.height(), width, height);
    BinaryMask::from_vec(width, height, data)
}

pub fn resize_grid<T: Scalar>(grid: &Grid<T>, width: usize, height: usize) -> Result<Grid<T>> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension(width, height));
    }
    Grid::new(
        width,
        height,
        resize_plane_bilinear(grid.data(), grid.width(), grid.height(), width, height),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Nearest source pixel centre for each destination centre, ties to the
    /// higher index.
    fn nearest_oracle(d: usize, src: usize, dst: usize) -> usize {
        let centre = (d as f64 + 0.5) * src as f64 / dst as f64;
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for s in 0..src {
            let dist = ((s as f64 + 0.5) - centre).abs();
            if dist <= best_dist {
                best = s;
                best_dist = dist;
            }
        }
        best
    }

    #[test]
    fn checkerboard_nearest_downsample_matches_oracle() {
        let data: Vec<f64> = (0..16).map(|i| ((i / 4 + i % 4) % 2) as f64).collect();
        let img = Image::new(4, 4, 1, data.clone()).unwrap();
        let out = resize(&img, 2, 2, ResizeMode::Nearest).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                let expected = data[nearest_oracle(y, 4, 2) * 4 + nearest_oracle(x, 4, 2)];
                assert_eq!(out.get(0, y, x), expected);
            }
        }
    }

    #[test]
    fn same_size_is_identity() {
        let img = Image::new(2, 2, 1, vec![0.1f64, 0.7, 0.3, 0.9]).unwrap();
        for mode in [ResizeMode::Bilinear, ResizeMode::Nearest] {
            assert_eq!(resize(&img, 2, 2, mode).unwrap(), img);
        }
    }

    #[test]
    fn zero_target_errors() {
        let img = Image::filled(2, 2, 1, 0.5f32).unwrap();
        assert!(matches!(
            resize(&img, 0, 3, ResizeMode::Bilinear),
            Err(Error::ZeroDimension(0, 3))
        ));
    }

    #[test]
    fn bilinear_upsample_midpoint() {
        let img = Image::new(2, 1, 1, vec![0.0f64, 1.0]).unwrap();
        let out = resize(&img, 4, 1, ResizeMode::Bilinear).unwrap();
        assert_eq!(out.data(), &[0.0, 0.25, 0.75, 1.0]);
    }

    proptest! {
        #[test]
        fn constant_stays_constant(
            v in 0.0f64..=1.0, sw in 1usize..9, sh in 1usize..9, dw in 1usize..13, dh in 1usize..13,
        ) {
            let img = Image::filled(sw, sh, 3, v).unwrap();
            for mode in [ResizeMode::Bilinear, ResizeMode::Nearest] {
                let out = resize(&img, dw, dh, mode).unwrap();
                prop_assert_eq!((out.width(), out.height()), (dw, dh));
                prop_assert!(out.data().iter().all(|&x| x == v));
            }
            let f = Image::filled(sw, sh, 1, v as f32).unwrap();
            let out = resize(&f, dw, dh, ResizeMode::Bilinear).unwrap();
            prop_assert!(out.data().iter().all(|&x| x == v as f32));
        }

        #[test]
        fn nearest_matches_oracle(sw in 1usize..10, dw in 1usize..10) {
            for d in 0..dw {
                prop_assert_eq!(nearest_index(d, sw, dw), nearest_oracle(d, sw, dw));
            }
        }
    }
}
