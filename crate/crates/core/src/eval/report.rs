use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, ConfidenceInterval, DEFAULT_RESAMPLES};
use super::metrics::{dice, hd95, iou, Hd95Flag, Hd95Mode};
use crate::error::{Error, Result};
use crate::imagecore::{load_mask_png, BinaryMask};

pub const FLAG_HD95_EMPTY: &str = "hd95-empty-mask";
pub const FLAG_HD95_BOTH_EMPTY: &str = "hd95-both-empty";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub image_id: String,
    pub dice: f64,
    pub iou: f64,
    pub hd95: f64,
    pub flags: Vec<String>,
}

impl MetricSample {
    pub fn compute(image_id: &str, pred: &BinaryMask, gt: &BinaryMask, mode: Hd95Mode) -> Result<Self> {
        let h = hd95::<f64>(pred, gt, mode)?;
        let flags = match h.flag {
            None => vec![],
            Some(Hd95Flag::EmptyMask) => vec![FLAG_HD95_EMPTY.to_string()],
            Some(Hd95Flag::BothEmpty) => vec![FLAG_HD95_BOTH_EMPTY.to_string()],
        };
        Ok(Self {
            image_id: image_id.to_string(),
            dice: dice(pred, gt)?,
            iou: iou(pred, gt)?,
            hd95: h.value,
            flags,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_bootstrap: usize,
    pub seed: u64,
    pub hd95_mode: Hd95Mode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_bootstrap: DEFAULT_RESAMPLES,
            seed: 0,
            hd95_mode: Hd95Mode::MaxDirected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_images: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub hd95_mode: Hd95Mode,
    pub dice: ConfidenceInterval<f64>,
    pub iou: ConfidenceInterval<f64>,
    pub hd95: ConfidenceInterval<f64>,
    pub per_image: Vec<MetricSample>,
}

impl EvalReport {
    /// Aggregates samples; each metric gets its own derived seed so the
    /// three intervals use independent resamples.
    pub fn from_samples(per_image: Vec<MetricSample>, opts: &EvalOptions) -> Result<Self> {
        let column = |f: fn(&MetricSample) -> f64| per_image.iter().map(f).collect::<Vec<_>>();
        let ci =
            |values: Vec<f64>, offset: u64| bootstrap_ci(&values, opts.n_bootstrap, opts.seed.wrapping_add(offset));
        Ok(Self {
            n_images: per_image.len(),
            n_bootstrap: opts.n_bootstrap,
            seed: opts.seed,
            hd95_mode: opts.hd95_mode,
            dice: ci(column(|s| s.dice), 0)?,
            iou: ci(column(|s| s.iou), 1)?,
            hd95: ci(column(|s| s.hd95), 2)?,
            per_image,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image_id", "dice", "iou", "hd95", "flags"])?;
        for s in &self.per_image {
            w.write_record([
                s.image_id.clone(),
                s.dice.to_string(),
                s.iou.to_string(),
                s.hd95.to_string(),
                s.flags.join(";"),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io {
            path: PathBuf::from("<csv buffer>"),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

/// Metrics for `(id, prediction, ground truth)` triples, in input order.
pub fn evaluate_pairs(pairs: &[(String, BinaryMask, BinaryMask)], opts: &EvalOptions) -> Result<EvalReport> {
    let samples = pairs
        .par_iter()
        .map(|(id, pred, gt)| MetricSample::compute(id, pred, gt, opts.hd95_mode))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_samples(samples, opts)
}

fn png_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, path);
        }
    }
    Ok(out)
}

/// Pairs PNG masks by file name across the two directories. Any file
/// present on only one side is an error.
pub fn evaluate_dir(pred_dir: &Path, gt_dir: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let preds = png_files(pred_dir)?;
    let gts = png_files(gt_dir)?;
    if let Some(name) = preds.keys().find(|k| !gts.contains_key(*k)) {
        return Err(Error::Unmatched(pred_dir.join(name).display().to_string()));
    }
    if let Some(name) = gts.keys().find(|k| !preds.contains_key(*k)) {
        return Err(Error::Unmatched(gt_dir.join(name).display().to_string()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pairs = preds
        .par_iter()
        .map(|(name, p)| {
            let id = name.rsplit_once('.').map_or(name.as_str(), |(s, _)| s).to_string();
            Ok((id, load_mask_png(p)?, load_mask_png(&gts[name])?))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_pairs(&pairs, opts)
}
