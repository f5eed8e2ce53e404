//! Post-processing of the segmenter mask: hole filling and the empty-mask
//! fallback.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imagecore::{label_components, region_to_mask, BinaryMask, Connectivity, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefineReport {
    pub holes_filled: usize,
    pub pixels_added: usize,
    pub input_area: usize,
    pub output_area: usize,
}

/// Fills every background component (4-connected) that cannot reach the
/// image border. Foreground is never removed.
pub fn fill_holes(mask: &BinaryMask) -> (BinaryMask, RefineReport) {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            let on_border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
            if on_border && !mask.get(r, c) {
                outside[r * w + c] = true;
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for (nr, nc) in neighbours {
            if nr < h && nc < w && !mask.get(nr, nc) && !outside[nr * w + nc] {
                outside[nr * w + nc] = true;
                queue.push_back((nr, nc));
            }
        }
    }

    let filled_data: Vec<bool> = outside.iter().map(|o| !o).collect();
    let holes = BinaryMask::from_vec(
        w,
        h,
        filled_data.iter().zip(mask.data()).map(|(f, m)| *f && !m).collect(),
    )
    .expect("dimensions match");
    let (_, holes_filled) = label_components(&holes, Connectivity::Four);
    let filled = BinaryMask::from_vec(w, h, filled_data).expect("dimensions match");
    let input_area = mask.area();
    let output_area = filled.area();
    (
        filled,
        RefineReport {
            holes_filled,
            pixels_added: output_area - input_area,
            input_area,
            output_area,
        },
    )
}

/// Where the final mask came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "source")]
pub enum FinalSource {
    Segmenter { report: RefineReport },
    Fallback,
}

/// Hole-filled segmenter mask, or the fused region when the segmenter
/// returned nothing.
pub fn select_final(mask: &BinaryMask, fallback: &Region) -> Result<(BinaryMask, FinalSource)> {
    if mask.is_blank() {
        let m = region_to_mask(fallback, mask.width(), mask.height())?;
        return Ok((m, FinalSource::Fallback));
    }
    let (filled, report) = fill_holes(mask);
    Ok((filled, FinalSource::Segmenter { report }))
}
