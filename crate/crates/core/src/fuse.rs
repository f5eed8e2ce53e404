//! Candidate fusion and prompt generation for the external promptable
//! segmenter.
//!
//! The morphology candidate with the largest pixel overlap with the union of
//! CAM components wins. With no overlap at all, the largest CAM component is
//! used instead.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::Region;

pub const DEFAULT_POINT_COUNT: usize = 10;
pub const MAX_POINT_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionSource {
    Morph,
    Cam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub chosen: Region,
    pub source: FusionSource,
    /// Overlap in pixels of each morphology candidate with the CAM union.
    pub overlap_table: Vec<usize>,
}

/// Earlier wins: larger key first, then `(row_min, col_min)`, then index.
fn better(a: (usize, usize, &Region, usize), b: (usize, usize, &Region, usize)) -> bool {
    let (ov_a, area_a, ra, ia) = a;
    let (ov_b, area_b, rb, ib) = b;
    match ov_a.cmp(&ov_b).then(area_a.cmp(&area_b)) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (ra.order_key(), ia) < (rb.order_key(), ib),
    }
}

pub fn fuse_regions(morph: &[Region], cam: &[Region]) -> Result<FusionResult> {
    if cam.is_empty() {
        return Err(if morph.is_empty() {
            Error::NoLesionEvidence
        } else {
            Error::EmptyCam
        });
    }
    let mut cam_union: Vec<(usize, usize)> = cam.iter().flat_map(|r| r.pixels().iter().copied()).collect();
    cam_union.sort_unstable();
    cam_union.dedup();

    let overlap_table: Vec<usize> = morph
        .iter()
        .map(|r| r.pixels().iter().filter(|p| cam_union.binary_search(p).is_ok()).count())
        .collect();

    let mut best: Option<usize> = None;
    for (i, r) in morph.iter().enumerate() {
        if overlap_table[i] == 0 {
            continue;
        }
        let cand = (overlap_table[i], r.area(), r, i);
        if best.is_none_or(|b| better(cand, (overlap_table[b], morph[b].area(), &morph[b], b))) {
            best = Some(i);
        }
    }
    if let Some(i) = best {
        return Ok(FusionResult {
            chosen: morph[i].clone(),
            source: FusionSource::Morph,
            overlap_table,
        });
    }

    let mut largest = 0;
    for (i, r) in cam.iter().enumerate().skip(1) {
        if better((r.area(), 0, r, i), (cam[largest].area(), 0, &cam[largest], largest)) {
            largest = i;
        }
    }
    Ok(FusionResult {
        chosen: cam[largest].clone(),
        source: FusionSource::Cam,
        overlap_table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    #[default]
    Box,
    Points,
}

/// Prompt for the external segmenter. Coordinates are `(x = col, y = row)`;
/// the box is `[x_min, y_min, x_max, y_max]`, inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub image_id: String,
    pub kind: PromptKind,
    #[serde(rename = "box")]
    pub bbox: Option<[usize; 4]>,
    pub points: Option<Vec<[usize; 2]>>,
    pub seed: u64,
}

impl PromptSpec {
    /// Structural checks (field presence, box order, point count).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(format!("prompt {}: {m}", self.image_id)));
        match self.kind {
            PromptKind::Box => match (self.bbox, &self.points) {
                (Some([x0, y0, x1, y1]), None) if x0 <= x1 && y0 <= y1 => Ok(()),
                (Some(_), None) => bad("box corners out of order"),
                _ => bad("box prompt needs a box and no points"),
            },
            PromptKind::Points => match (&self.bbox, &self.points) {
                (None, Some(p)) if (1..=MAX_POINT_COUNT).contains(&p.len()) => Ok(()),
                (None, Some(p)) => bad(&format!("{} points, expected 1..=10", p.len())),
                _ => bad("point prompt needs points and no box"),
            },
        }
    }

    /// Checks every point or the box against the region it was built from.
    pub fn validate_against(&self, region: &Region) -> Result<()> {
        self.validate()?;
        if let Some(points) = &self.points {
            if let Some([x, y]) = points.iter().find(|[x, y]| !region.contains(*y, *x)) {
                return Err(Error::InvalidParam(format!("point ({x}, {y}) outside region")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: PromptSpec = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Minimal enclosing rectangle of the fused region.
pub fn box_prompt(f: &FusionResult, image_id: &str, seed: u64) -> PromptSpec {
    let b = f.chosen.bbox();
    PromptSpec {
        image_id: image_id.to_owned(),
        kind: PromptKind::Box,
        bbox: Some([b.col_min, b.row_min, b.col_max, b.row_max]),
        points: None,
        seed,
    }
}

/// `n` pixels of the fused region drawn uniformly without replacement (all
/// pixels when the region is smaller), listed in raster order.
pub fn point_prompt(f: &FusionResult, image_id: &str, seed: u64, n: usize) -> PromptSpec {
    let pixels = f.chosen.pixels();
    let n = n.clamp(1, MAX_POINT_COUNT);
    let mut picked: Vec<usize> = if pixels.len() <= n {
        (0..pixels.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, pixels.len(), n).into_vec()
    };
    picked.sort_unstable();
    PromptSpec {
        image_id: image_id.to_owned(),
        kind: PromptKind::Points,
        bbox: None,
        points: Some(picked.into_iter().map(|i| [pixels[i].1, pixels[i].0]).collect()),
        seed,
    }
}

pub fn make_prompt(f: &FusionResult, image_id: &str, kind: PromptKind, seed: u64, n: usize) -> PromptSpec {
    match kind {
        PromptKind::Box => box_prompt(f, image_id, seed),
        PromptKind::Points => point_prompt(f, image_id, seed, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{region_to_mask, BBox};
    use proptest::prelude::*;

    fn block(r0: usize, c0: usize, h: usize, w: usize) -> Region {
        Region::from_pixels((r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| (r, c))).collect()).unwrap()
    }

    #[test]
    fn picks_largest_overlap() {
        let a = block(0, 0, 3, 3);
        let b = block(10, 10, 4, 4);
        // CAM covers 3 px of A and 7 px of B
        let cam = vec![
            Region::from_pixels(vec![(2, 0), (2, 1), (2, 2)]).unwrap(),
            Region::from_pixels(vec![
                (12, 10),
                (12, 11),
                (12, 12),
                (12, 13),
                (13, 10),
                (13, 11),
                (13, 12),
            ])
            .unwrap(),
        ];
        let f = fuse_regions(&[a, b.clone()], &cam).unwrap();
        assert_eq!(f.source, FusionSource::Morph);
        assert_eq!(f.chosen, b);
        assert_eq!(f.overlap_table, vec![3, 7]);
    }

    #[test]
    fn falls_back_to_cam_without_overlap() {
        let morph = vec![block(0, 0, 2, 2)];
        let small = block(10, 10, 2, 2);
        let big = block(20, 20, 3, 3);
        let f = fuse_regions(&morph, &[small, big.clone()]).unwrap();
        assert_eq!(f.source, FusionSource::Cam);
        assert_eq!(f.chosen, big);
        assert_eq!(f.overlap_table, vec![0]);

        let f = fuse_regions(&[], &[block(1, 1, 1, 1)]).unwrap();
        assert_eq!(f.source, FusionSource::Cam);
    }

    #[test]
    fn self_intersection() {
        let a = block(3, 4, 5, 2);
        let f = fuse_regions(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
        assert_eq!(f.chosen, a);
        assert_eq!(f.overlap_table, vec![a.area()]);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(fuse_regions(&[], &[]), Err(Error::NoLesionEvidence)));
        assert!(matches!(fuse_regions(&[block(0, 0, 1, 1)], &[]), Err(Error::EmptyCam)));
    }

    #[test]
    fn ties_prefer_area_then_order() {
        let cam = vec![block(0, 0, 1, 20)];
        let small = block(0, 0, 1, 2);
        let tall = block(0, 5, 4, 2);
        let f = fuse_regions(&[small, tall.clone()], &cam).unwrap();
        assert_eq!(f.chosen, tall);
        let left = block(0, 0, 2, 2);
        let right = block(0, 10, 2, 2);
        let f = fuse_regions(&[right, left.clone()], &cam).unwrap();
        assert_eq!(f.chosen, left);
    }

    fn fused(region: Region) -> FusionResult {
        FusionResult {
            chosen: region,
            source: FusionSource::Morph,
            overlap_table: vec![],
        }
    }

    #[test]
    fn box_prompt_examples() {
        let r = Region::from_pixels(vec![(2, 3), (3, 4), (3, 5), (3, 6), (4, 7)]).unwrap();
        let p = box_prompt(&fused(r), "img", 0);
        assert_eq!(p.bbox, Some([3, 2, 7, 4]));
        let single = box_prompt(&fused(block(6, 9, 1, 1)), "img", 0);
        assert_eq!(single.bbox, Some([9, 6, 9, 6]));
        single.validate().unwrap();
    }

    #[test]
    fn json_schema_is_exact() {
        let p = box_prompt(&fused(block(2, 3, 3, 5)), "benign/benign (1)", 7);
        let v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"image_id": "benign/benign (1)", "kind": "box", "box": [3, 2, 7, 4], "points": null, "seed": 7})
        );
        let q = point_prompt(&fused(block(0, 0, 1, 2)), "x", 1, 10);
        let v: serde_json::Value = serde_json::from_str(&q.to_json().unwrap()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"image_id": "x", "kind": "points", "box": null, "points": [[0, 0], [1, 0]], "seed": 1})
        );
        assert_eq!(PromptSpec::from_json(&q.to_json().unwrap()).unwrap(), q);
        assert!(
            PromptSpec::from_json(r#"{"image_id":"x","kind":"box","box":[5,0,1,0],"points":null,"seed":0}"#).is_err()
        );
        assert!(PromptSpec::from_json(r#"{"image_id":"x","kind":"points","box":null,"points":[],"seed":0}"#).is_err());
    }

    #[test]
    fn small_region_yields_all_pixels() {
        let r = block(4, 4, 2, 2);
        let p = point_prompt(&fused(r.clone()), "x", 99, 10);
        assert_eq!(p.points.unwrap(), vec![[4, 4], [5, 4], [4, 5], [5, 5]]);
    }

    #[test]
    fn point_sampling_is_seeded_and_uniform() {
        let r = block(0, 0, 10, 10);
        let f = fused(r.clone());
        assert_eq!(point_prompt(&f, "x", 5, 10), point_prompt(&f, "x", 5, 10));

        let trials = 1000u64;
        let mut counts = vec![0u32; 100];
        for seed in 0..trials {
            let p = point_prompt(&f, "x", seed, 10);
            p.validate_against(&r).unwrap();
            for [x, y] in p.points.unwrap() {
                counts[y * 10 + x] += 1;
            }
        }
        // inclusion probability 0.1 per pixel and trial
        let mean = trials as f64 * 0.1;
        let sigma = (trials as f64 * 0.1 * 0.9).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma + 1.0, "pixel {i}: {c}");
        }
    }

    proptest! {
        #[test]
        fn prompts_stay_on_region(
            pixels in prop::collection::btree_set((0usize..12, 0usize..12), 1..60), seed in any::<u64>(),
        ) {
            // use the largest component of a random pixel set
            let mut m = crate::imagecore::BinaryMask::new(12, 12);
            for &(r, c) in &pixels { m.set(r, c, true); }
            let comps = crate::imagecore::connected_components(&m);
            let region = comps.into_iter().max_by_key(Region::area).unwrap();
            let f = fused(region.clone());
            let mask = region_to_mask(&region, 12, 12).unwrap();
            let pts = point_prompt(&f, "x", seed, 10);
            for [x, y] in pts.points.unwrap() {
                prop_assert!(mask.get(y, x));
            }
            let [x0, y0, x1, y1] = box_prompt(&f, "x", seed).bbox.unwrap();
            let b = BBox { row_min: y0, col_min: x0, row_max: y1, col_max: x1 };
            prop_assert!(region.pixels().iter().all(|&(r, c)| b.contains(r, c)));
            prop_assert!(region.pixels().iter().any(|p| p.0 == y0) && region.pixels().iter().any(|p| p.0 == y1));
            prop_assert!(region.pixels().iter().any(|p| p.1 == x0) && region.pixels().iter().any(|p| p.1 == x1));
        }
    }
}
