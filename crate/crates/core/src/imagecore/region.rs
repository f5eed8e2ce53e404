use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};

/// Pixel adjacency used for component labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

/// Inclusive axis-aligned bounding box in `(row, col)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl BBox {
    pub fn height(&self) -> usize {
        self.row_max - self.row_min + 1
    }

    pub fn width(&self) -> usize {
        self.col_max - self.col_min + 1
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }
}

/// One 8-connected foreground component.
///
/// `pixels` is kept sorted in raster order so set operations can use binary
/// search.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pixels: Vec<(usize, usize)>,
    bbox: BBox,
    centroid: (f64, f64),
    aspect_ratio: f64,
}

impl Region {
    /// Validates connectivity and derives the geometry.
    pub fn from_pixels(mut pixels: Vec<(usize, usize)>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::InvalidRegion("no pixels".into()));
        }
        pixels.sort_unstable();
        pixels.dedup();
        if !is_eight_connected(&pixels) {
            return Err(Error::InvalidRegion("pixels are not 8-connected".into()));
        }
        Ok(Self::from_sorted_unchecked(pixels))
    }

    fn from_sorted_unchecked(pixels: Vec<(usize, usize)>) -> Self {
        let mut bbox = BBox {
            row_min: usize::MAX,
            col_min: usize::MAX,
            row_max: 0,
            col_max: 0,
        };
        let (mut sr, mut sc) = (0.0, 0.0);
        for &(r, c) in &pixels {
            bbox.row_min = bbox.row_min.min(r);
            bbox.col_min = bbox.col_min.min(c);
            bbox.row_max = bbox.row_max.max(r);
            bbox.col_max = bbox.col_max.max(c);
            sr += r as f64;
            sc += c as f64;
        }
        let n = pixels.len() as f64;
        Self {
            aspect_ratio: bbox.height() as f64 / bbox.width() as f64,
            centroid: (sr / n, sc / n),
            bbox,
            pixels,
        }
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// `(row, col)` mean of the member pixels.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    /// Bounding-box height over width.
    pub fn aspect_ratio(&self) -> f64 {
        self.aspect_ratio
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.bbox.contains(row, col) && self.pixels.binary_search(&(row, col)).is_ok()
    }

    /// Ordering key used everywhere a deterministic region order is needed.
    pub fn order_key(&self) -> (usize, usize) {
        (self.bbox.row_min, self.bbox.col_min)
    }
}

fn is_eight_connected(sorted: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; sorted.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        let (r, c) = sorted[i];
        for &(dr, dc) in Connectivity::Eight.offsets() {
            let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc)) else {
                continue;
            };
            if let Ok(j) = sorted.binary_search(&(nr, nc)) {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
    }
    reached == sorted.len()
}

/// Labels foreground components. Label 0 is background; components are
/// numbered `1..=count` in order of their first pixel in raster order.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            for &(dr, dc) in connectivity.offsets() {
                let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc)) else {
                    continue;
                };
                if nr >= h || nc >= w {
                    continue;
                }
                let j = nr * w + nc;
                if mask.data()[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, next as usize)
}

/// Maximal 8-connected foreground regions ordered by `(row_min, col_min)`.
pub fn connected_components(mask: &BinaryMask) -> Vec<Region> {
    let (labels, count) = label_components(mask, Connectivity::Eight);
    let w = mask.width();
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            buckets[l as usize - 1].push((i / w, i % w));
        }
    }
    let mut regions: Vec<Region> = buckets.into_iter().map(Region::from_sorted_unchecked).collect();
    // stable: equal keys keep first-pixel order
    regions.sort_by_key(Region::order_key);
    regions
}

/// Rasterizes a region onto a `w` x `h` canvas.
pub fn region_to_mask(region: &Region, width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height);
    for &(row, col) in region.pixels() {
        if row >= height || col >= width {
            return Err(Error::OutOfBounds {
                row,
                col,
                width,
                height,
            });
        }
        mask.set(row, col, true);
    }
    Ok(mask)
}

/// Union of several regions on one canvas.
pub fn regions_to_mask(regions: &[Region], width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height);
    for region in regions {
        for &(row, col) in region.pixels() {
            if row >= height || col >= width {
                return Err(Error::OutOfBounds {
                    row,
                    col,
                    width,
                    height,
                });
            }
            mask.set(row, col, true);
        }
    }
    Ok(mask)
}

/// Serialized region: geometry summary plus run-length encoded pixels
/// (`[row, col_start, col_end]`, inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub id: usize,
    pub bbox: [usize; 4],
    pub centroid: [f64; 2],
    pub aspect_ratio: f64,
    pub area: usize,
    pub runs: Vec<[usize; 3]>,
}

impl RegionRecord {
    pub fn from_region(id: usize, region: &Region) -> Self {
        let mut runs: Vec<[usize; 3]> = Vec::new();
        for &(r, c) in region.pixels() {
            match runs.last_mut() {
                Some(run) if run[0] == r && run[2] + 1 == c => run[2] = c,
                _ => runs.push([r, c, c]),
            }
        }
        let b = region.bbox();
        Self {
            id,
            bbox: [b.row_min, b.col_min, b.row_max, b.col_max],
            centroid: [region.centroid().0, region.centroid().1],
            aspect_ratio: region.aspect_ratio(),
            area: region.area(),
            runs,
        }
    }

    pub fn to_region(&self) -> Result<Region> {
        let mut pixels = Vec::with_capacity(self.area);
        for &[r, c0, c1] in &self.runs {
            if c1 < c0 {
                return Err(Error::InvalidRegion(format!("run [{r}, {c0}, {c1}] is reversed")));
            }
            pixels.extend((c0..=c1).map(|c| (r, c)));
        }
        Region::from_pixels(pixels)
    }
}

/// A region table for one image: what the stage commands exchange on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub width: usize,
    pub height: usize,
    pub regions: Vec<RegionRecord>,
}

impl RegionSet {
    pub fn new(width: usize, height: usize, regions: &[Region]) -> Self {
        Self {
            width,
            height,
            regions: regions
                .iter()
                .enumerate()
                .map(|(i, r)| RegionRecord::from_region(i, r))
                .collect(),
        }
    }

    pub fn to_regions(&self) -> Result<Vec<Region>> {
        self.regions
            .iter()
            .map(|rec| {
                let region = rec.to_region()?;
                let b = region.bbox();
                if b.row_max >= self.height || b.col_max >= self.width {
                    return Err(Error::OutOfBounds {
                        row: b.row_max,
                        col: b.col_max,
                        width: self.width,
                        height: self.height,
                    });
                }
                Ok(region)
            })
            .collect()
    }
}
