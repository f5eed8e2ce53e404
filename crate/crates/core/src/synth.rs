//! Synthetic ultrasound-like phantoms and oracle CAM tensors for tests and
//! demos.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{save_image_png, save_mask_png, BinaryMask, Image, TensorFile};

/// A bright noisy field with one dark structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Lesion centre `(row, col)`.
    pub center: (f64, f64),
    /// Semi-axes `(rows, cols)` before rotation.
    pub semi_axes: (f64, f64),
    /// Rotation in radians.
    pub angle: f64,
    pub background: f64,
    pub lesion: f64,
    /// Contrast `background - lesion` divided by the noise standard deviation.
    pub snr: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Random ellipse kept well inside the rows the anatomical filter
    /// accepts.
    pub fn random(width: usize, height: usize, snr: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (width as f64, height as f64);
        let a = rng.random_range(0.08..0.14) * h;
        let b = rng.random_range(0.10..0.20) * w;
        let row = rng.random_range(0.30..0.45) * h;
        let col = rng.random_range(0.35..0.65) * w;
        Self {
            width,
            height,
            center: (row, col),
            semi_axes: (a, b),
            angle: rng.random_range(-0.4..0.4),
            background: 0.7,
            lesion: 0.2,
            snr,
            seed,
        }
    }

    fn noise_sigma(&self) -> f64 {
        (self.background - self.lesion).abs() / self.snr
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::ZeroDimension(self.width, self.height));
        }
        // NaN fails the comparison too
        if ![self.snr, self.semi_axes.0, self.semi_axes.1].iter().all(|&v| v > 0.0) {
            return Err(Error::InvalidParam("phantom needs positive SNR and semi-axes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: Image<f64>,
    pub gt: BinaryMask,
}

fn inside_ellipse(spec: &PhantomSpec, r: usize, c: usize) -> bool {
    let (dy, dx) = (r as f64 - spec.center.0, c as f64 - spec.center.1);
    let (s, co) = spec.angle.sin_cos();
    let u = co * dy - s * dx;
    let v = s * dy + co * dx;
    (u / spec.semi_axes.0).powi(2) + (v / spec.semi_axes.1).powi(2) <= 1.0
}

fn render(spec: &PhantomSpec, gt: BinaryMask) -> Result<Phantom> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x005e_ed0f_5a1d);
    let noise = Normal::new(0.0, spec.noise_sigma()).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let data = gt
        .data()
        .iter()
        .map(|&fg| {
            let base = if fg { spec.lesion } else { spec.background };
            (base + noise.sample(&mut rng)).clamp(0.0, 1.0)
        })
        .collect();
    let image = Image::new(spec.width, spec.height, 1, data)?;
    Ok(Phantom { image, gt })
}

/// Dark ellipse on a bright field; the ground truth is the ellipse.
pub fn ellipse_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let mut gt = BinaryMask::new(spec.width, spec.height);
    for r in 0..spec.height {
        for c in 0..spec.width {
            if inside_ellipse(spec, r, c) {
                gt.set(r, c, true);
            }
        }
    }
    render(spec, gt)
}

/// Thin dark horizontal streak (a duct-like structure) at the phantom centre,
/// `thickness` rows tall and spanning the middle 60% of the width. The
/// returned ground truth is the streak itself.
pub fn streak_phantom(spec: &PhantomSpec, thickness: usize) -> Result<Phantom> {
    spec.validate()?;
    let mut gt = BinaryMask::new(spec.width, spec.height);
    let r0 = (spec.center.0 as usize).min(spec.height.saturating_sub(thickness));
    let (c0, c1) = (spec.width / 5, spec.width - spec.width / 5);
    for r in r0..(r0 + thickness).min(spec.height) {
        for c in c0..c1 {
            gt.set(r, c, true);
        }
    }
    render(spec, gt)
}

/// Box-blurred, area-downsampled copy of `mask` on a `grid x grid` lattice.
pub fn blurred_occupancy(mask: &BinaryMask, grid: usize, radius: usize) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let mut coarse = vec![0.0f64; grid * grid];
    let mut counts = vec![0usize; grid * grid];
    for r in 0..h {
        for c in 0..w {
            let cell = (r * grid / h) * grid + c * grid / w;
            counts[cell] += 1;
            if mask.get(r, c) {
                coarse[cell] += 1.0;
            }
        }
    }
    for (v, n) in coarse.iter_mut().zip(&counts) {
        *v /= (*n).max(1) as f64;
    }
    let g = grid as isize;
    let rad = radius as isize;
    let mut out = vec![0.0; grid * grid];
    for r in 0..g {
        for c in 0..g {
            let (mut s, mut n) = (0.0, 0.0);
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let (rr, cc) = (r + dr, c + dc);
                    if (0..g).contains(&rr) && (0..g).contains(&cc) {
                        s += coarse[(rr * g + cc) as usize];
                        n += 1.0;
                    }
                }
            }
            out[(r * g + c) as usize] = s / n;
        }
    }
    out
}

/// Activation and gradient tensors `[K, grid, grid]` whose LayerCAM map is
/// the blurred ground truth: channel `k` carries the map scaled by
/// `(k + 1) / K`, and all gradients are a positive constant.
pub fn oracle_cam_tensors(gt: &BinaryMask, channels: usize, grid: usize) -> Result<(TensorFile, TensorFile)> {
    if channels == 0 || grid == 0 {
        return Err(Error::InvalidParam("oracle CAM needs K >= 1 and grid >= 1".into()));
    }
    let base = blurred_occupancy(gt, grid, 1);
    let mut act = Vec::with_capacity(channels * grid * grid);
    for k in 0..channels {
        let scale = (k + 1) as f64 / channels as f64;
        act.extend(base.iter().map(|&v| (v * scale) as f32));
    }
    let grad = vec![0.5f32; act.len()];
    let shape = vec![channels, grid, grid];
    Ok((TensorFile::new(shape.clone(), act)?, TensorFile::new(shape, grad)?))
}

/// Writes `n` ellipse phantoms as `benign/phantom_NNN.png` with
/// `_mask.png` companions under `root`, in the class-folder layout the
/// ingester reads. Phantom `i` uses seed `seed + i`.
pub fn write_phantom_dataset(root: &Path, n: usize, size: usize, snr: f64, seed: u64) -> Result<Vec<PhantomSpec>> {
    let dir = root.join("benign");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        let spec = PhantomSpec::random(size, size, snr, seed.wrapping_add(i as u64));
        let p = ellipse_phantom(&spec)?;
        save_image_png(&p.image, dir.join(format!("phantom_{i:03}.png")))?;
        save_mask_png(&p.gt, dir.join(format!("phantom_{i:03}_mask.png")))?;
        specs.push(spec);
    }
    Ok(specs)
}
