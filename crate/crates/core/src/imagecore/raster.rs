use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Planar floating-point image with samples in `[0, 1]`.
///
/// Channel-planar, row-major: sample `(ch, row, col)` lives at
/// `ch * width * height + row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty {width}x{height} image")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels, expected 1 or 3")));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} samples, expected {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::InvalidImage(format!("sample {i} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single value.
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from single-channel planes (1 or 3 of them).
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<T>]) -> Result<Self> {
        let data = planes.iter().flat_map(|p| p.iter().copied()).collect();
        Self::new(width, height, planes.len(), data)
    }

    pub(crate) fn from_raw_clamped(width: usize, height: usize, channels: usize, mut data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = v.max(T::zero()).min(T::one());
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, ch: usize, row: usize, col: usize) -> T {
        self.data[ch * self.width * self.height + row * self.width + col]
    }

    pub fn plane(&self, ch: usize) -> &[T] {
        let n = self.width * self.height;
        &self.data[ch * n..(ch + 1) * n]
    }

    /// Single-channel copy of channel `ch`.
    pub fn channel(&self, ch: usize) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(ch).to_vec(),
        }
    }

    /// Per-pixel channel mean as a single-channel image.
    pub fn luminance(&self) -> Image<T> {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.width * self.height;
        let c = T::from_count(self.channels);
        let data = (0..n)
            .map(|i| (0..self.channels).map(|ch| self.data[ch * n + i]).sum::<T>() / c)
            .collect();
        Image::from_raw_clamped(self.width, self.height, 1, data)
    }

    /// `1 - v` for every sample.
    pub fn inverted(&self) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| T::one() - v).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image::from_raw_clamped(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        )
    }
}

/// Real-valued single-plane raster without a range invariant
/// (ACE responses, raw CAM maps, heatmaps).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                shape: vec![height, width],
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    /// `(min, max)` over all samples.
    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Grid<T> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel boolean raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                shape: vec![height, width],
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    /// Builds a mask from `0`/non-zero values, handy for literals in tests.
    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::from_vec(width, height, data.iter().map(|&v| v != 0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// True when no pixel is set.
    pub fn is_blank(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize> {
        self.same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).filter(|(a, b)| **a && **b).count())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.same_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.same_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// Foreground coordinates in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Foreground pixels with at least one background 4-neighbour; pixels
    /// outside the canvas count as background.
    pub fn boundary(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        let mut out = BinaryMask::new(w, h);
        for (r, c) in self.pixels() {
            let edge = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !self.get(r - 1, c)
                || !self.get(r + 1, c)
                || !self.get(r, c - 1)
                || !self.get(r, c + 1);
            if edge {
                out.set(r, c, true);
            }
        }
        out
    }

    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }
}
