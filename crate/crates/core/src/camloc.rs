//! Class-activation localization maps computed from exported activation
//! and gradient tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{connected_components, resize_grid, save_gray8_png, BinaryMask, Grid, Region, TensorFile};
use crate::scalar::Scalar;

pub const DEFAULT_CAM_THRESHOLD: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CamMethod {
    #[default]
    LayerCam,
    GradCam,
}

/// Feature maps `A` and gradients `dy/dA`, both `[K, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CamTensors<T> {
    channels: usize,
    height: usize,
    width: usize,
    activations: Vec<T>,
    gradients: Vec<T>,
}

impl<T: Scalar> CamTensors<T> {
    pub fn new(channels: usize, height: usize, width: usize, activations: Vec<T>, gradients: Vec<T>) -> Result<Self> {
        let n = channels * height * width;
        for len in [activations.len(), gradients.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    shape: vec![channels, height, width],
                    expected: n,
                    found: len,
                });
            }
        }
        let all = activations.iter().chain(&gradients);
        if let Some(i) = all.clone().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i % n));
        }
        Ok(Self {
            channels,
            height,
            width,
            activations,
            gradients,
        })
    }

    /// Accepts `[K, H, W]` or `[1, K, H, W]` tensors of identical shape.
    pub fn from_files(activations: &TensorFile, gradients: &TensorFile) -> Result<Self> {
        if activations.shape() != gradients.shape() {
            return Err(Error::ShapeMismatch(
                activations.shape().to_vec(),
                gradients.shape().to_vec(),
            ));
        }
        let (k, h, w) = match *activations.shape() {
            [k, h, w] | [1, k, h, w] => (k, h, w),
            ref other => {
                return Err(Error::InvalidParam(format!(
                    "CAM tensors must be [K, H, W], got {other:?}"
                )))
            }
        };
        let cast = |t: &TensorFile| t.data().iter().map(|&v| T::lit(v as f64)).collect();
        Self::new(k, h, w, cast(activations), cast(gradients))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn plane(&self, data: &[T], k: usize) -> std::ops::Range<usize> {
        let n = self.height * self.width;
        debug_assert_eq!(data.len(), n * self.channels);
        k * n..(k + 1) * n
    }
}

/// LayerCAM: each activation weighted by its ReLU-ed gradient, summed over
/// channels, then ReLU-ed.
pub fn layercam<T: Scalar>(t: &CamTensors<T>) -> Grid<T> {
    let n = t.height * t.width;
    let mut acc = vec![T::zero(); n];
    for k in 0..t.channels {
        let range = t.plane(&t.activations, k);
        let a = &t.activations[range.clone()];
        let g = &t.gradients[range];
        for ((m, &av), &gv) in acc.iter_mut().zip(a).zip(g) {
            *m += gv.max(T::zero()) * av;
        }
    }
    Grid::new(t.width, t.height, acc.into_iter().map(|v| v.max(T::zero())).collect()).expect("dimensions match")
}

/// Grad-CAM: channel weights are spatial gradient means.
pub fn gradcam<T: Scalar>(t: &CamTensors<T>) -> Grid<T> {
    let n = t.height * t.width;
    let mut acc = vec![T::zero(); n];
    for k in 0..t.channels {
        let range = t.plane(&t.activations, k);
        let weight = t.gradients[range.clone()].iter().copied().sum::<T>() / T::from_count(n);
        for (m, &av) in acc.iter_mut().zip(&t.activations[range]) {
            *m += weight * av;
        }
    }
    Grid::new(t.width, t.height, acc.into_iter().map(|v| v.max(T::zero())).collect()).expect("dimensions match")
}

pub fn cam_map<T: Scalar>(t: &CamTensors<T>, method: CamMethod) -> Grid<T> {
    match method {
        CamMethod::LayerCam => layercam(t),
        CamMethod::GradCam => gradcam(t),
    }
}

/// Localization map scaled to `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<T>(Grid<T>);

impl<T: Scalar> Heatmap<T> {
    pub fn new(grid: Grid<T>) -> Result<Self> {
        let top = T::lit(255.0);
        if grid.data().iter().any(|&v| !(v >= T::zero() && v <= top)) {
            return Err(Error::InvalidParam("heatmap values must lie in [0, 255]".into()));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Rounded 8-bit rendering.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.0
            .data()
            .iter()
            .map(|v| v.as_f64().round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save_gray8_png(self.width(), self.height(), &self.to_gray8(), path)
    }
}

/// Min-max scales a raw map to `[0, 255]` (flat maps become all zero), then
/// bilinearly resamples to `width` x `height`.
pub fn normalize_upsample<T: Scalar>(map: &Grid<T>, width: usize, height: usize) -> Result<Heatmap<T>> {
    let (lo, hi) = map.min_max();
    let span = hi - lo;
    let top = T::lit(255.0);
    let scaled = if span > T::zero() {
        map.map(|v| (v - lo) / span * top)
    } else {
        map.map(|_| T::zero())
    };
    let resized = if (width, height) == (map.width(), map.height()) {
        scaled
    } else {
        resize_grid(&scaled, width, height)?
    };
    Heatmap::new(resized.map(|v| v.max(T::zero()).min(top)))
}

pub fn cam_mask<T: Scalar>(hm: &Heatmap<T>, threshold: T) -> BinaryMask {
    let data = hm.grid().data().iter().map(|&v| v >= threshold).collect();
    BinaryMask::from_vec(hm.width(), hm.height(), data).expect("dimensions match")
}

/// Components of `heatmap >= threshold`: the CAM candidate set.
pub fn cam_binarize<T: Scalar>(hm: &Heatmap<T>, threshold: T) -> Vec<Region> {
    connected_components(&cam_mask(hm, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(a: Vec<f64>, g: Vec<f64>, h: usize, w: usize) -> CamTensors<f64> {
        CamTensors::new(1, h, w, a, g).unwrap()
    }

    #[test]
    fn hand_evaluated_layercam() {
        let t = single(vec![1.0, -1.0, 2.0, 0.0], vec![1.0, -1.0, 0.5, 0.0], 2, 2);
        assert_eq!(layercam(&t).data(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn negative_gradients_give_zero_map() {
        let t = CamTensors::new(2, 2, 2, vec![3.0, -1.0, 2.0, 5.0, 1.0, 1.0, 1.0, 1.0], vec![-0.5; 8]).unwrap();
        assert!(layercam(&t).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradcam_examples() {
        let zero = single(vec![1.0, 2.0], vec![0.0, 0.0], 1, 2);
        assert!(gradcam(&zero).data().iter().all(|&v| v == 0.0));

        let t = single(vec![2.0, -2.0], vec![1.0, 1.0], 1, 2);
        assert_eq!(gradcam(&t).data(), &[2.0, 0.0]);

        let cancel = CamTensors::new(2, 1, 2, vec![2.0, -2.0, 2.0, -2.0], vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        assert!(gradcam(&cancel).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_examples() {
        let m = Grid::new(3, 1, vec![0.0f64, 1.0, 2.0]).unwrap();
        let hm = normalize_upsample(&m, 3, 1).unwrap();
        assert_eq!(hm.grid().data(), &[0.0, 127.5, 255.0]);
        let regions = cam_binarize(&hm, 200.0);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].pixels(), &[(0, 2)]);

        let flat = Grid::new(2, 2, vec![4.0f64; 4]).unwrap();
        assert!(normalize_upsample(&flat, 4, 4)
            .unwrap()
            .grid()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_heatmap_is_one_region() {
        let hm = Heatmap::new(Grid::new(5, 4, vec![255.0f32; 20]).unwrap()).unwrap();
        let regions = cam_binarize(&hm, 200.0);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].area(), 20);
    }

    #[test]
    fn from_files_checks_shapes() {
        let a = TensorFile::new(vec![1, 2, 2], vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        let g = TensorFile::new(vec![1, 2, 2], vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        let t = CamTensors::<f64>::from_files(&a, &g).unwrap();
        assert_eq!(layercam(&t).data(), &[1.0, 0.0, 1.0, 0.0]);

        let batched = TensorFile::new(vec![1, 1, 2, 2], vec![1.0; 4]).unwrap();
        assert!(CamTensors::<f32>::from_files(&batched, &batched).is_ok());

        let other = TensorFile::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        assert!(matches!(
            CamTensors::<f32>::from_files(&a, &other),
            Err(Error::ShapeMismatch(..))
        ));
        assert!(CamTensors::<f64>::new(1, 1, 1, vec![f64::NAN], vec![1.0]).is_err());
    }

    fn tensors(k: usize, h: usize, w: usize) -> impl Strategy<Value = CamTensors<f64>> {
        let n = k * h * w;
        (
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(move |(a, g)| CamTensors::new(k, h, w, a, g).unwrap())
    }

    proptest! {
        #[test]
        fn layercam_nonnegative_and_linear_in_gradients(t in tensors(3, 4, 5), c in 0.1f64..10.0) {
            let m = layercam(&t);
            prop_assert!(m.data().iter().all(|&v| v >= 0.0));
            let scaled = CamTensors::new(3, 4, 5, t.activations.clone(),
                t.gradients.iter().map(|g| g * c).collect()).unwrap();
            for (a, b) in m.data().iter().zip(layercam(&scaled).data()) {
                prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn layercam_monotone_in_positive_gradient_activations(
            t in tensors(2, 3, 3), idx in 0usize..18, bump in 0.0f64..3.0,
        ) {
            prop_assume!(t.gradients[idx] > 0.0);
            let mut a = t.activations.clone();
            a[idx] += bump;
            let up = CamTensors::new(2, 3, 3, a, t.gradients.clone()).unwrap();
            let pix = idx % 9;
            prop_assert!(layercam(&up).data()[pix] >= layercam(&t).data()[pix]);
        }

        #[test]
        fn gradcam_agrees_with_layercam_on_constant_nonnegative_gradients(
            a in prop::collection::vec(-2.0f64..2.0, 3 * 16), g in prop::collection::vec(0.0f64..1.0, 3),
        ) {
            let grads: Vec<f64> = (0..3 * 16).map(|i| g[i / 16]).collect();
            let t = CamTensors::new(3, 4, 4, a, grads).unwrap();
            for (x, y) in layercam(&t).data().iter().zip(gradcam(&t).data()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn binarized_map_scale_invariant(t in tensors(2, 6, 6), c in 0.01f64..100.0) {
            let m = layercam(&t);
            let (lo, hi) = m.min_max();
            prop_assume!(hi > lo);
            let base = cam_mask(&normalize_upsample(&m, 24, 24).unwrap(), 200.0);
            let scaled = cam_mask(&normalize_upsample(&m.map(|v| v * c), 24, 24).unwrap(), 200.0);
            prop_assert_eq!(base, scaled);
        }
    }
}
