use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imagecore::BinaryMask;
use crate::scalar::Scalar;

use super::percentile;

/// `2|A∩B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice<T: Scalar>(a: &BinaryMask, b: &BinaryMask) -> Result<T> {
    let inter = a.intersection_area(b)?;
    let total = a.area() + b.area();
    if total == 0 {
        return Ok(T::one());
    }
    Ok(T::from_count(2 * inter) / T::from_count(total))
}

/// `|A∩B| / |A∪B|`; two empty masks score 1.
pub fn iou<T: Scalar>(a: &BinaryMask, b: &BinaryMask) -> Result<T> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(T::one());
    }
    Ok(T::from_count(inter) / T::from_count(union))
}

/// How the two directed distance sets are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hd95Mode {
    /// `max(P95(d(∂A→∂B)), P95(d(∂B→∂A)))`
    #[default]
    MaxDirected,
    /// `P95` of both directed distance sets pooled together.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hd95Flag {
    /// Exactly one mask was empty; the value is the image diagonal.
    EmptyMask,
    /// Both masks were empty; the value is 0.
    BothEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hd95<T> {
    pub value: T,
    pub flag: Option<Hd95Flag>,
}

const FAR: f64 = 1e30;

/// Exact squared Euclidean distance transform to the nearest seed pixel
/// (lower-envelope-of-parabolas, separable in rows and columns).
pub(crate) fn squared_distance_to(seeds: &BinaryMask) -> Vec<f64> {
    let (w, h) = (seeds.width(), seeds.height());
    let mut grid: Vec<f64> = seeds.data().iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let mut buf = Vec::new();
    for c in 0..w {
        buf.clear();
        buf.extend((0..h).map(|r| grid[r * w + c]));
        let out = envelope_1d(&buf);
        for r in 0..h {
            grid[r * w + c] = out[r];
        }
    }
    for r in 0..h {
        let row = &mut grid[r * w..(r + 1) * w];
        let out = envelope_1d(row);
        row.copy_from_slice(&out);
    }
    grid
}

fn envelope_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![FAR; n];
    let sites: Vec<usize> = (0..n).filter(|&i| f[i] < FAR).collect();
    if sites.is_empty() {
        return out;
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let cross = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for &q in &sites {
        while let Some(&p) = v.last() {
            let s = cross(q, p);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        } else {
            let s = cross(q, *v.last().unwrap());
            v.push(q);
            z.push(s);
        }
    }
    z.push(f64::INFINITY);
    let mut k = 0;
    for (x, o) in out.iter_mut().enumerate() {
        while z[k + 1] < x as f64 {
            k += 1;
        }
        let d = x as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
    out
}

fn directed<T: Scalar>(from: &BinaryMask, to_dist2: &[f64]) -> Vec<T> {
    let w = from.width();
    from.pixels().map(|(r, c)| T::lit(to_dist2[r * w + c].sqrt())).collect()
}

/// 95th-percentile Hausdorff distance between the 4-neighbour boundaries of
/// two masks, in pixels.
pub fn hd95<T: Scalar>(a: &BinaryMask, b: &BinaryMask, mode: Hd95Mode) -> Result<Hd95<T>> {
    a.same_dims(b)?;
    match (a.is_blank(), b.is_blank()) {
        (true, true) => {
            return Ok(Hd95 {
                value: T::zero(),
                flag: Some(Hd95Flag::BothEmpty),
            })
        }
        (true, false) | (false, true) => {
            return Ok(Hd95 {
                value: T::lit(a.diagonal()),
                flag: Some(Hd95Flag::EmptyMask),
            })
        }
        _ => {}
    }
    let (ba, bb) = (a.boundary(), b.boundary());
    let mut ab: Vec<T> = directed(&ba, &squared_distance_to(&bb));
    let mut ba_d: Vec<T> = directed(&bb, &squared_distance_to(&ba));
    let value = match mode {
        Hd95Mode::MaxDirected => {
            sort(&mut ab);
            sort(&mut ba_d);
            percentile(&ab, 95.0).max(percentile(&ba_d, 95.0))
        }
        Hd95Mode::Pooled => {
            ab.append(&mut ba_d);
            sort(&mut ab);
            percentile(&ab, 95.0)
        }
    };
    Ok(Hd95 { value, flag: None })
}

fn sort<T: Scalar>(v: &mut [T]) {
    v.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dice_iou_examples() {
        let a = BinaryMask::from_u8(4, 2, &[1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
        let b = BinaryMask::from_u8(4, 2, &[0, 0, 1, 1, 1, 1, 0, 0]).unwrap();
        assert_eq!(dice::<f64>(&a, &b).unwrap(), 0.5);
        assert_eq!(iou::<f64>(&a, &b).unwrap(), 2.0 / 6.0);
        assert_eq!(dice::<f64>(&a, &a).unwrap(), 1.0);
        assert_eq!(iou::<f32>(&a, &a).unwrap(), 1.0);
        let c = BinaryMask::from_u8(4, 2, &[0, 0, 0, 0, 0, 0, 1, 1]).unwrap();
        assert_eq!(dice::<f64>(&a, &c).unwrap(), 0.0);
        let empty = BinaryMask::new(4, 2);
        assert_eq!(dice::<f64>(&empty, &empty).unwrap(), 1.0);
        assert_eq!(iou::<f64>(&empty, &empty).unwrap(), 1.0);
        assert!(dice::<f64>(&a, &BinaryMask::new(2, 4)).is_err());
    }

    #[test]
    fn hd95_examples() {
        let a = BinaryMask::from_u8(3, 3, &[1, 1, 0, 1, 1, 0, 0, 0, 0]).unwrap();
        assert_eq!(hd95::<f64>(&a, &a, Hd95Mode::MaxDirected).unwrap().value, 0.0);

        let mut p = BinaryMask::new(10, 3);
        let mut q = BinaryMask::new(10, 3);
        p.set(1, 2, true);
        q.set(1, 7, true);
        let h = hd95::<f64>(&p, &q, Hd95Mode::MaxDirected).unwrap();
        assert_eq!(h.value, 5.0);
        assert_eq!(h.flag, None);

        let e = hd95::<f64>(&p, &BinaryMask::new(10, 3), Hd95Mode::MaxDirected).unwrap();
        assert_eq!(e.flag, Some(Hd95Flag::EmptyMask));
        assert_eq!(e.value, (109.0f64).sqrt());
        let both = hd95::<f64>(&BinaryMask::new(2, 2), &BinaryMask::new(2, 2), Hd95Mode::Pooled).unwrap();
        assert_eq!((both.value, both.flag), (0.0, Some(Hd95Flag::BothEmpty)));
    }

    fn brute_dist2(seeds: &BinaryMask) -> Vec<f64> {
        let (w, h) = (seeds.width(), seeds.height());
        let s: Vec<(usize, usize)> = seeds.pixels().collect();
        (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                s.iter()
                    .map(|&(y, x)| (r.abs_diff(y).pow(2) + c.abs_diff(x).pow(2)) as f64)
                    .fold(FAR, f64::min)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn distance_transform_is_exact(
            w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(prop::bool::weighted(0.1), 400),
        ) {
            let m = BinaryMask::from_vec(w, h, bits[..w * h].to_vec()).unwrap();
            prop_assert_eq!(squared_distance_to(&m), brute_dist2(&m));
        }
    }
}
