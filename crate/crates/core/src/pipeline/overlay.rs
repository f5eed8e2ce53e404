use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::DatasetManifest;
use super::run::{image_dir, FINAL_MASK_FILE, MANIFEST_FILE, REPORT_JSON};
use crate::error::{Error, Result};
use crate::imagecore::{load_mask_png, load_png, resize_mask, save_rgb8_png, to_byte, BinaryMask, Image};

pub const GT_COLOR: [u8; 3] = [0, 255, 0];
pub const PRED_COLOR: [u8; 3] = [255, 0, 0];
pub const SHARED_COLOR: [u8; 3] = [255, 255, 0];
pub const WATERMARK_COLOR: [u8; 3] = [255, 64, 64];

/// 5x7 glyphs, one row per byte, high bit on the left.
fn glyph(ch: char) -> [u8; 7] {
    match ch {
        'E' => [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f],
        'M' => [0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11],
        'P' => [0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10],
        'T' => [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'Y' => [0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04],
        _ => [0; 7],
    }
}

/// Pixels of `text` drawn at `(row, col)` with integer `scale`.
pub(crate) fn text_pixels(text: &str, row: usize, col: usize, scale: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, ch) in text.chars().enumerate() {
        let x0 = col + i * 6 * scale;
        for (gy, bits) in glyph(ch).iter().enumerate() {
            for gx in 0..5 {
                if bits & (0x10 >> gx) != 0 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            out.push((row + gy * scale + dy, x0 + gx * scale + dx));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Grayscale base with the ground-truth contour in green, the prediction
/// contour in red (yellow where they coincide) and an `EMPTY` mark when
/// the prediction is empty. Returns interleaved RGB bytes.
pub fn render_overlay(base: &Image<f32>, gt: &BinaryMask, pred: &BinaryMask) -> Result<Vec<u8>> {
    let (w, h) = (base.width(), base.height());
    gt.same_dims(pred)?;
    if (gt.width(), gt.height()) != (w, h) {
        return Err(Error::DimensionMismatch(w, h, gt.width(), gt.height()));
    }
    let gray = base.luminance();
    let mut rgb: Vec<u8> = gray.data().iter().flat_map(|&v| [to_byte(v); 3]).collect();
    let (gb, pb) = (gt.boundary(), pred.boundary());
    for i in 0..w * h {
        let color = match (gb.data()[i], pb.data()[i]) {
            (true, true) => SHARED_COLOR,
            (true, false) => GT_COLOR,
            (false, true) => PRED_COLOR,
            (false, false) => continue,
        };
        rgb[3 * i..3 * i + 3].copy_from_slice(&color);
    }
    if pred.is_blank() {
        let scale = (w / 128).max(1);
        for (r, c) in text_pixels("EMPTY", 2 * scale, 2 * scale, scale) {
            if r < h && c < w {
                let i = r * w + c;
                rgb[3 * i..3 * i + 3].copy_from_slice(&WATERMARK_COLOR);
            }
        }
    }
    Ok(rgb)
}

/// Writes `overlays/<image_id>.png` for every image of a completed run,
/// at the original image size.
pub fn emit_overlays(run_dir: &Path) -> Result<Vec<PathBuf>> {
    if !run_dir.join(REPORT_JSON).is_file() {
        return Err(Error::IncompleteRun(format!(
            "{} has no {REPORT_JSON}",
            run_dir.display()
        )));
    }
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = DatasetManifest::from_jsonl(&text)?;
    let mut written = Vec::new();
    for e in &manifest.entries {
        let final_path = image_dir(run_dir, &e.image_id).join(FINAL_MASK_FILE);
        if !final_path.is_file() {
            return Err(Error::IncompleteRun(format!("no final mask for {}", e.image_id)));
        }
        let base = load_png::<f32>(&e.image_path)?;
        let (w, h) = (base.width(), base.height());
        let gt = e.load_gt(w, h)?;
        let pred = resize_mask(&load_mask_png(&final_path)?, w, h)?;
        let rgb = render_overlay(&base, &gt, &pred)?;
        let out = run_dir.join("overlays").join(format!("{}.png", e.image_id));
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).map_err(|err| Error::io(parent, err))?;
        }
        save_rgb8_png(w, h, &rgb, &out)?;
        written.push(out);
    }
    Ok(written)
}
