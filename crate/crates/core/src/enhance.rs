//! Automatic color enhancement (ACE).
//!
//! Each channel is enhanced independently. The response at pixel `x` is the
//! distance-weighted sum of clamped intensity differences to every other
//! pixel `y`,
//!
//! ```text
//! R(x) = sum_{y != x} s(I(x) - I(y)) / |x - y|,   s(t) = clamp(alpha * t, -1, 1)
//! ```
//!
//! followed by min-max normalization to `[0, 1]`. Evaluation is exact
//! (all pairs) when `sample_stride == 1`; larger strides restrict `y` to the
//! grid of rows and columns divisible by the stride.

use rayon::prelude::*;

use crate::imagecore::{Grid, Image};
use crate::scalar::Scalar;

/// Largest side evaluated without neighbourhood subsampling.
pub const EXACT_MAX_SIDE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceParams<T> {
    pub alpha: T,
    pub sample_stride: usize,
}

impl<T: Scalar> Default for AceParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(5.0),
            sample_stride: 1,
        }
    }
}

impl<T: Scalar> AceParams<T> {
    /// Default slope with the stride `ceil(max_side / 128)`.
    pub fn for_size(width: usize, height: usize) -> Self {
        Self {
            sample_stride: auto_stride(width, height),
            ..Self::default()
        }
    }
}

pub fn auto_stride(width: usize, height: usize) -> usize {
    width.max(height).div_ceil(EXACT_MAX_SIDE).max(1)
}

#[inline]
fn slope<T: Scalar>(alpha: T, t: T) -> T {
    (alpha * t).max(-T::one()).min(T::one())
}

/// Raw ACE response of a single plane.
pub fn ace_response_plane<T: Scalar>(plane: &[T], width: usize, height: usize, p: &AceParams<T>) -> Grid<T> {
    assert_eq!(plane.len(), width * height, "plane length");
    let stride = p.sample_stride.max(1);
    let sample_rows: Vec<usize> = (0..height).step_by(stride).collect();
    let sample_cols: Vec<usize> = (0..width).step_by(stride).collect();
    let ns = sample_cols.len();
    let samples: Vec<T> = sample_rows
        .iter()
        .flat_map(|&r| sample_cols.iter().map(move |&c| plane[r * width + c]))
        .collect();

    let columns: Vec<Vec<T>> = (0..width)
        .into_par_iter()
        .map(|col| {
            // dist[dy * ns + j] = |(dy, sample_cols[j] - col)|; the zero
            // distance maps to +inf so the pixel itself contributes +0.
            let mut dist = vec![T::zero(); height * ns];
            for dy in 0..height {
                for (j, &sc) in sample_cols.iter().enumerate() {
                    let dx = sc.abs_diff(col);
                    let d2 = dy * dy + dx * dx;
                    dist[dy * ns + j] = if d2 == 0 {
                        T::infinity()
                    } else {
                        T::from_count(d2).sqrt()
                    };
                }
            }
            (0..height)
                .map(|row| {
                    let v = plane[row * width + col];
                    let mut acc = T::zero();
                    for (i, &sr) in sample_rows.iter().enumerate() {
                        let drow = &dist[sr.abs_diff(row) * ns..][..ns];
                        let srow = &samples[i * ns..][..ns];
                        for (&y, &d) in srow.iter().zip(drow) {
                            acc += slope(p.alpha, v - y) / d;
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut data = vec![T::zero(); width * height];
    for (col, values) in columns.into_iter().enumerate() {
        for (row, v) in values.into_iter().enumerate() {
            data[row * width + col] = v;
        }
    }
    Grid::new(width, height, data).expect("dimensions match")
}

/// Raw ACE response of a single-channel image.
///
/// # Panics
/// If `channel` has more than one channel.
pub fn ace_response<T: Scalar>(channel: &Image<T>, p: &AceParams<T>) -> Grid<T> {
    assert_eq!(channel.channels(), 1, "ace_response expects a single channel");
    ace_response_plane(channel.data(), channel.width(), channel.height(), p)
}

/// Min-max normalization to `[0, 1]`; a flat response maps to `0.5`.
pub fn ace_normalize<T: Scalar>(response: &Grid<T>) -> Image<T> {
    let (lo, hi) = response.min_max();
    let span = hi - lo;
    let data = if span > T::zero() {
        response.data().iter().map(|&r| (r - lo) / span).collect()
    } else {
        vec![T::lit(0.5); response.data().len()]
    };
    Image::from_raw_clamped(response.width(), response.height(), 1, data)
}

/// Enhances every channel independently. Channels identical to an earlier
/// one reuse its result.
pub fn ace_enhance<T: Scalar>(img: &Image<T>, p: &AceParams<T>) -> Image<T> {
    let (w, h) = (img.width(), img.height());
    let mut planes: Vec<Vec<T>> = Vec::with_capacity(img.channels());
    for ch in 0..img.channels() {
        let plane = img.plane(ch);
        if let Some(prev) = (0..ch).find(|&c| img.plane(c) == plane) {
            planes.push(planes[prev].clone());
            continue;
        }
        planes.push(ace_normalize(&ace_response_plane(plane, w, h, p)).into_data());
    }
    Image::from_planes(w, h, &planes).expect("planes in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct pairwise sum over the (optionally subsampled) domain.
    fn oracle(values: &[f64], w: usize, h: usize, alpha: f64, stride: usize) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for xr in 0..h {
            for xc in 0..w {
                let mut acc = 0.0;
                for yr in (0..h).filter(|r| r % stride == 0) {
                    for yc in (0..w).filter(|c| c % stride == 0) {
                        if (yr, yc) == (xr, xc) {
                            continue;
                        }
                        let t = alpha * (values[xr * w + xc] - values[yr * w + yc]);
                        let s = t.clamp(-1.0, 1.0);
                        let d2 = (xr.abs_diff(yr).pow(2) + xc.abs_diff(yc).pow(2)) as f64;
                        acc += s / d2.sqrt();
                    }
                }
                out[xr * w + xc] = acc;
            }
        }
        out
    }

    fn params(alpha: f64, stride: usize) -> AceParams<f64> {
        AceParams {
            alpha,
            sample_stride: stride,
        }
    }

    #[test]
    fn constant_channel_has_zero_response() {
        let img = Image::filled(5, 4, 1, 0.3f64).unwrap();
        assert!(ace_response(&img, &params(5.0, 1)).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_pixel_pair_saturates() {
        let img = Image::new(2, 1, 1, vec![0.2f64, 0.8]).unwrap();
        assert_eq!(ace_response(&img, &params(5.0, 1)).data(), &[-1.0, 1.0]);
    }

    #[test]
    fn normalize_examples() {
        let r = Grid::new(2, 1, vec![-1.0f64, 1.0]).unwrap();
        assert_eq!(ace_normalize(&r).data(), &[0.0, 1.0]);
        let flat = Grid::new(3, 1, vec![0.0f64; 3]).unwrap();
        assert_eq!(ace_normalize(&flat).data(), &[0.5; 3]);
        let r = Grid::new(3, 1, vec![0.0f64, 1.0, 3.0]).unwrap();
        assert_eq!(ace_normalize(&r).data(), &[0.0, 1.0 / 3.0, 1.0]);
    }

    #[test]
    fn constant_rgb_enhances_to_half() {
        let img = Image::filled(4, 3, 3, 0.8f32).unwrap();
        let out = ace_enhance(&img, &AceParams::default());
        assert_eq!(out.channels(), 3);
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ramp_matches_pairwise_oracle() {
        let values = [0.0, 0.5, 1.0];
        let img = Image::new(3, 1, 1, values.to_vec()).unwrap();
        let expected_r = oracle(&values, 3, 1, 5.0, 1);
        // -1/1 - 1/2, 1 - 1, 1/2 + 1
        assert_eq!(expected_r, vec![-1.5, 0.0, 1.5]);
        let (lo, hi) = (-1.5, 1.5);
        let expected: Vec<f64> = expected_r.iter().map(|r| (r - lo) / (hi - lo)).collect();
        assert_eq!(ace_enhance(&img, &params(5.0, 1)).data(), expected.as_slice());
    }

    #[test]
    fn monotone_ramps_stay_monotone() {
        for n in 2..=32 {
            let values: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let img = Image::new(n, 1, 1, values).unwrap();
            let out = ace_enhance(&img, &params(5.0, 1));
            assert!(out.data().windows(2).all(|w| w[0] <= w[1]), "n = {n}");
        }
    }

    #[test]
    fn exact_on_64_square() {
        let (w, h) = (64, 64);
        let values: Vec<f64> = (0..w * h)
            .map(|i| ((i * 7919 % 1013) as f64 / 1012.0).clamp(0.0, 1.0))
            .collect();
        let img = Image::new(w, h, 1, values.clone()).unwrap();
        let got = ace_response(&img, &params(5.0, 1));
        assert_eq!(got.data(), oracle(&values, w, h, 5.0, 1).as_slice());
    }

    #[test]
    fn strided_matches_subsampled_oracle() {
        let (w, h) = (13, 9);
        let values: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let img = Image::new(w, h, 1, values.clone()).unwrap();
        for stride in [2, 3, 4] {
            let got = ace_response(&img, &params(3.0, stride));
            assert_eq!(got.data(), oracle(&values, w, h, 3.0, stride).as_slice());
        }
    }

    #[test]
    fn auto_stride_values() {
        assert_eq!(auto_stride(128, 64), 1);
        assert_eq!(auto_stride(256, 256), 2);
        assert_eq!(auto_stride(129, 10), 2);
        assert_eq!(auto_stride(500, 400), 4);
    }

    fn image_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..7, 1usize..7).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0.0f64..=1.0, w * h)))
    }

    proptest! {
        #[test]
        fn negation_is_antisymmetric((w, h, values) in image_strategy(), alpha in 0.5f64..20.0) {
            let img = Image::new(w, h, 1, values).unwrap();
            let p = params(alpha, 1);
            let r = ace_response(&img, &p);
            let rn = ace_response(&img.inverted(), &p);
            for (a, b) in r.data().iter().zip(rn.data()) {
                prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn shift_invariant_without_saturation(
            (w, h, values) in image_strategy(), shift in -0.2f64..0.2,
        ) {
            // values squeezed into [0.4, 0.6] so alpha * diff stays below 1
            let squeezed: Vec<f64> = values.iter().map(|v| 0.4 + 0.2 * v).collect();
            let shifted: Vec<f64> = squeezed.iter().map(|v| v + shift).collect();
            let p = params(4.0, 1);
            let a = ace_response(&Image::new(w, h, 1, squeezed).unwrap(), &p);
            let b = ace_response(&Image::new(w, h, 1, shifted).unwrap(), &p);
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalized_output_spans_unit_interval((w, h, values) in image_strategy()) {
            let img = Image::new(w, h, 1, values).unwrap();
            let r = ace_response(&img, &params(5.0, 1));
            let l = ace_normalize(&r);
            let (lo, hi) = r.min_max();
            if hi > lo {
                let (a, b) = Grid::new(w, h, l.data().to_vec()).unwrap().min_max();
                prop_assert_eq!((a, b), (0.0, 1.0));
            }
            prop_assert!(l.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
