//! Morphology-driven suspicious-lesion extraction: intensity clustering,
//! global thresholding and anatomical / shape filtering.

mod kmeans;

pub use kmeans::{kmeans_1d, kmeans_intensity, KMeansOptions, KMeansResult, DEFAULT_RESTARTS, MAX_ITERATIONS};

use serde::{Deserialize, Serialize};

use crate::enhance::{ace_enhance, AceParams};
use crate::error::{Error, Result};
use crate::imagecore::{connected_components, BinaryMask, Image, Region};
use crate::scalar::Scalar;

/// Operand of the global threshold that follows clustering.
///
/// `Membership` thresholds the rendered lesion-cluster image (0 or 255), so
/// the result is the darkest cluster itself. `Enhanced` and `Raw` instead
/// intersect the cluster with a darkness gate `round((1 - v) * 255) >= t`
/// on the named intensity image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizeOperand {
    #[default]
    Membership,
    Enhanced,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphFilterParams {
    pub bin_threshold: u8,
    /// Fraction of the image height excluded at the bottom (chest wall).
    pub bottom_band: f64,
    /// Fraction of the image height excluded at the top (subcutaneous fat).
    pub top_band: f64,
    /// Regions with bbox height / width below this are dropped.
    pub min_ratio: f64,
}

impl Default for MorphFilterParams {
    fn default() -> Self {
        Self {
            bin_threshold: 90,
            bottom_band: 1.0 / 3.0,
            top_band: 0.1,
            min_ratio: 0.2,
        }
    }
}

impl MorphFilterParams {
    pub fn validate(&self) -> Result<()> {
        let bands_ok = self.top_band >= 0.0 && self.bottom_band >= 0.0 && self.top_band + self.bottom_band < 1.0;
        if !bands_ok {
            return Err(Error::InvalidParam(format!(
                "bands top={} bottom={} must be non-negative with sum < 1",
                self.top_band, self.bottom_band
            )));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio < 1.0) {
            return Err(Error::InvalidParam(format!(
                "min_ratio {} outside (0, 1)",
                self.min_ratio
            )));
        }
        Ok(())
    }
}

/// Foreground iff `round(v * 255) >= threshold`.
pub fn binarize<T: Scalar>(img: &Image<T>, threshold: u8) -> BinaryMask {
    let data = img
        .plane(0)
        .iter()
        .map(|&v| (v.as_f64() * 255.0).round() >= threshold as f64)
        .collect();
    BinaryMask::from_vec(img.width(), img.height(), data).expect("plane size")
}

/// Pixels whose darkness `1 - v` passes [`binarize`].
pub fn dark_gate<T: Scalar>(img: &Image<T>, threshold: u8) -> BinaryMask {
    binarize(&img.inverted(), threshold)
}

/// Renders the darkest cluster (hypoechoic prior) as a 0/1 membership image
/// and thresholds it.
pub fn cluster_to_mask<T: Scalar>(km: &KMeansResult<T>, img: &Image<T>, threshold: u8) -> BinaryMask {
    let lesion = km.darkest();
    let membership: Vec<T> = km
        .assignment
        .iter()
        .map(|&a| if a == lesion { T::one() } else { T::zero() })
        .collect();
    let rendered = Image::new(img.width(), img.height(), 1, membership).expect("assignment covers image");
    let in_cluster = BinaryMask::from_vec(
        img.width(),
        img.height(),
        km.assignment.iter().map(|&a| a == lesion).collect(),
    )
    .expect("assignment covers image");
    in_cluster
        .intersection(&binarize(&rendered, threshold))
        .expect("same dimensions")
}

/// Drops regions whose centroid row falls in the top or bottom band.
pub fn anatomical_filter(regions: &[Region], height: usize, p: &MorphFilterParams) -> Vec<Region> {
    let h = height as f64;
    let upper = h - h * p.bottom_band;
    let lower = h * p.top_band;
    regions
        .iter()
        .filter(|r| {
            let row = r.centroid().0;
            row >= lower && row < upper
        })
        .cloned()
        .collect()
}

/// Drops regions flatter than `min_ratio` (height / width).
pub fn aspect_filter(regions: &[Region], p: &MorphFilterParams) -> Vec<Region> {
    regions
        .iter()
        .filter(|r| r.aspect_ratio() >= p.min_ratio)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphParams<T> {
    pub ace: AceParams<T>,
    pub k: usize,
    pub seed: u64,
    pub filter: MorphFilterParams,
    pub operand: BinarizeOperand,
}

impl<T: Scalar> MorphParams<T> {
    pub fn for_size(width: usize, height: usize) -> Self {
        Self {
            ace: AceParams::for_size(width, height),
            k: 2,
            seed: 0,
            filter: MorphFilterParams::default(),
            operand: BinarizeOperand::default(),
        }
    }
}

/// Every intermediate of [`morph_segment`].
#[derive(Debug, Clone)]
pub struct MorphOutput<T> {
    pub enhanced: Image<T>,
    /// `None` when clustering is ill-posed (e.g. a constant image).
    pub kmeans: Option<KMeansResult<T>>,
    pub suspect_mask: BinaryMask,
    pub candidates: Vec<Region>,
    pub regions: Vec<Region>,
}

pub fn morph_segment_detailed<T: Scalar>(img: &Image<T>, p: &MorphParams<T>) -> MorphOutput<T> {
    let enhanced = ace_enhance(img, &p.ace);
    let intensity = enhanced.luminance();
    let kmeans = kmeans_intensity(&intensity, p.k, p.seed).ok();
    let suspect_mask = match &kmeans {
        None => BinaryMask::new(img.width(), img.height()),
        Some(km) => {
            let cluster = cluster_to_mask(km, &intensity, p.filter.bin_threshold);
            let gate = match p.operand {
                BinarizeOperand::Membership => None,
                BinarizeOperand::Enhanced => Some(dark_gate(&intensity, p.filter.bin_threshold)),
                BinarizeOperand::Raw => Some(dark_gate(&img.luminance(), p.filter.bin_threshold)),
            };
            match gate {
                Some(g) => cluster.intersection(&g).expect("same dimensions"),
                None => cluster,
            }
        }
    };
    let candidates = connected_components(&suspect_mask);
    let banded = anatomical_filter(&candidates, img.height(), &p.filter);
    let regions = aspect_filter(&banded, &p.filter);
    MorphOutput {
        enhanced,
        kmeans,
        suspect_mask,
        candidates,
        regions,
    }
}

/// Morphology candidate set: enhance, cluster, threshold, label, filter.
/// May be empty.
pub fn morph_segment<T: Scalar>(img: &Image<T>, p: &MorphParams<T>) -> Vec<Region> {
    morph_segment_detailed(img, p).regions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::regions_to_mask;
    use proptest::prelude::*;

    fn block(r0: usize, c0: usize, h: usize, w: usize) -> Region {
        let pixels = (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| (r, c))).collect();
        Region::from_pixels(pixels).unwrap()
    }

    #[test]
    fn binarize_threshold_edges() {
        let img = Image::new(3, 1, 1, vec![100.0 / 255.0, 89.0 / 255.0, 0.0f64]).unwrap();
        let m = binarize(&img, 90);
        assert_eq!(m.data(), &[true, false, false]);
        assert!(binarize(&img, 0).data().iter().all(|&v| v));
    }

    #[test]
    fn anatomical_band_examples() {
        let p = MorphFilterParams::default();
        // centroids at rows 280, 20 and 150 on a 300-row image
        let low = block(279, 10, 3, 3);
        let high = block(19, 10, 3, 3);
        let mid = block(149, 10, 3, 3);
        let kept = anatomical_filter(&[low, high, mid.clone()], 300, &p);
        assert_eq!(kept, vec![mid]);
    }

    #[test]
    fn aspect_examples() {
        let p = MorphFilterParams::default();
        let flat = block(0, 0, 1, 10);
        let half = block(0, 20, 5, 10);
        let square = block(10, 0, 4, 4);
        assert_eq!(flat.aspect_ratio(), 0.1);
        let kept = aspect_filter(&[flat, half.clone(), square.clone()], &p);
        assert_eq!(kept, vec![half, square]);
    }

    #[test]
    fn dark_disk_selected_on_bright_field() {
        let (w, h) = (21, 21);
        let mut data = vec![0.9f64; w * h];
        let mut disk = BinaryMask::new(w, h);
        for r in 0..h {
            for c in 0..w {
                if (r as f64 - 10.0).powi(2) + (c as f64 - 10.0).powi(2) <= 25.0 {
                    data[r * w + c] = 0.1;
                    disk.set(r, c, true);
                }
            }
        }
        let img = Image::new(w, h, 1, data).unwrap();
        let km = kmeans_intensity(&img, 2, 0).unwrap();
        assert_eq!(cluster_to_mask(&km, &img, 90), disk);

        let inv = img.inverted();
        let km_inv = kmeans_intensity(&inv, 2, 0).unwrap();
        assert_eq!(cluster_to_mask(&km_inv, &inv, 90), disk.complement());
    }

    #[test]
    fn constant_image_yields_no_regions() {
        let img = Image::filled(16, 16, 1, 0.8f32).unwrap();
        let out = morph_segment_detailed(&img, &MorphParams::for_size(16, 16));
        assert!(out.kmeans.is_none());
        assert!(out.suspect_mask.is_blank());
        assert!(out.regions.is_empty());
    }

    #[test]
    fn param_validation() {
        assert!(MorphFilterParams::default().validate().is_ok());
        let bad = MorphFilterParams {
            top_band: 0.5,
            bottom_band: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MorphFilterParams {
            min_ratio: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn regions_strategy() -> impl Strategy<Value = Vec<Region>> {
        prop::collection::vec((0usize..90, 0usize..90, 1usize..10, 1usize..10), 0..12)
            .prop_map(|blocks| blocks.into_iter().map(|(r, c, h, w)| block(r, c, h, w)).collect())
    }

    proptest! {
        #[test]
        fn filters_are_idempotent(regions in regions_strategy()) {
            let p = MorphFilterParams::default();
            let once = anatomical_filter(&regions, 100, &p);
            prop_assert_eq!(anatomical_filter(&once, 100, &p), once.clone());
            let once = aspect_filter(&regions, &p);
            prop_assert_eq!(aspect_filter(&once, &p), once);
        }

        #[test]
        fn morph_output_respects_filters(seed in any::<u64>()) {
            let (w, h) = (24, 30);
            let mut s = seed | 1;
            let data: Vec<f64> = (0..w * h).map(|_| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                (s % 1000) as f64 / 999.0
            }).collect();
            let img = Image::new(w, h, 1, data).unwrap();
            let p = MorphParams { seed, ..MorphParams::for_size(w, h) };
            let out = morph_segment_detailed(&img, &p);
            for r in &out.regions {
                let row = r.centroid().0;
                prop_assert!(row >= h as f64 * 0.1 && row < h as f64 * (2.0 / 3.0) + 1e-9);
                prop_assert!(r.aspect_ratio() >= 0.2);
            }
            let m = regions_to_mask(&out.regions, w, h).unwrap();
            prop_assert_eq!(m.intersection_area(&out.suspect_mask).unwrap(), m.area());
        }
    }
}
