use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::dataset::{DatasetManifest, ManifestEntry};
use super::provider::Provider;
use super::sha256_hex;
use crate::camloc::{cam_binarize, cam_map, normalize_upsample};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, MetricSample};
use crate::fuse::{fuse_regions, make_prompt, FusionSource, PromptSpec};
use crate::imagecore::{
    load_png, resize, resize_mask, save_image_png, save_mask_png, BinaryMask, RegionSet, ResizeMode,
};
use crate::morphseg::morph_segment_detailed;
use crate::refine::{select_final, FinalSource};

pub const FLAG_FALLBACK: &str = "fallback";
pub const FLAG_PROVIDER_ERROR: &str = "provider-error";
pub const FLAG_CAM_NEGATIVE: &str = "cam-negative";
pub const FLAG_CAM_EMPTY: &str = "cam-empty";
pub const FLAG_NO_EVIDENCE: &str = "no-evidence";

pub const RECORD_FILE: &str = "record.json";
pub const FINAL_MASK_FILE: &str = "final.png";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "config.toml";

/// Everything recorded about one processed image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    /// Hash of config, input bytes and provider outputs.
    pub fingerprint: String,
    pub width: usize,
    pub height: usize,
    pub original_width: usize,
    pub original_height: usize,
    pub morph_candidates: usize,
    pub morph_regions: usize,
    pub cam_regions: usize,
    pub fusion_source: Option<FusionSource>,
    pub overlap_table: Vec<usize>,
    pub prompt: Option<PromptSpec>,
    pub final_source: Option<FinalSource>,
    pub provider_errors: Vec<String>,
    pub sample: MetricSample,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    /// Recompute every image even when a matching record exists.
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub report: EvalReport,
    pub records: Vec<ImageRecord>,
    pub reused: usize,
}

/// Directory holding the artifacts of `image_id` inside a run.
pub fn image_dir(run_dir: &Path, image_id: &str) -> PathBuf {
    run_dir.join("images").join(image_id)
}

/// `run-<16 hex>` derived from the canonical config and the manifest.
pub fn run_dir_name(config: &PipelineConfig, manifest: &DatasetManifest) -> String {
    let key = format!("{}\n{}", config.canonical_json(), manifest.to_jsonl());
    format!("run-{}", &sha256_hex(key.as_bytes())[..16])
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn fingerprint(config: &PipelineConfig, entry: &ManifestEntry, provider: &dyn Provider) -> Result<String> {
    let mut parts = vec![config.canonical_json(), sha256_hex(&read_bytes(&entry.image_path)?)];
    for p in entry.mask_paths() {
        parts.push(sha256_hex(&read_bytes(p)?));
    }
    parts.push(match provider.fingerprint(&entry.image_id) {
        Ok(f) => f,
        Err(e) => format!("error:{e}"),
    });
    Ok(sha256_hex(parts.join("\n").as_bytes()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn load_record(dir: &Path) -> Option<ImageRecord> {
    let text = fs::read_to_string(dir.join(RECORD_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every stage for one image, writing artifacts into `dir`. The
/// record is written last, so its presence marks a finished image.
pub fn process_image(
    entry: &ManifestEntry,
    config: &PipelineConfig,
    provider: &dyn Provider,
    dir: &Path,
    fingerprint: String,
) -> Result<ImageRecord> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = (config.resize_width, config.resize_height);
    let id = entry.image_id.as_str();

    let original = load_png::<f32>(&entry.image_path)?;
    let (ow, oh) = (original.width(), original.height());
    let gt = resize_mask(&entry.load_gt(ow, oh)?, w, h)?;
    let img = resize(&original, w, h, ResizeMode::Bilinear)?;
    save_image_png(&img, dir.join("input.png"))?;
    save_mask_png(&gt, dir.join("gt.png"))?;

    let mut flags: Vec<String> = Vec::new();
    let mut provider_errors = Vec::new();

    let morph = morph_segment_detailed(&img, &config.morph_params());
    save_image_png(&morph.enhanced, dir.join("enhanced.png"))?;
    save_mask_png(&morph.suspect_mask, dir.join("suspect.png"))?;
    write_json(&RegionSet::new(w, h, &morph.regions), &dir.join("morph_regions.json"))?;

    let cam_regions = match provider.cam_tensors(id) {
        Ok(t) => {
            let map = cam_map(&t, config.cam_method);
            if map.data().iter().all(|&v| v == 0.0) {
                flags.push(FLAG_CAM_NEGATIVE.into());
            }
            let hm = normalize_upsample(&map, w, h)?;
            hm.save_png(dir.join("cam.png"))?;
            cam_binarize(&hm, config.cam_threshold as f32)
        }
        Err(e) => {
            provider_errors.push(e.to_string());
            vec![]
        }
    };
    write_json(&RegionSet::new(w, h, &cam_regions), &dir.join("cam_regions.json"))?;

    let (mut fusion_source, mut overlap_table, mut prompt, mut final_source) = (None, vec![], None, None);
    let final_mask = match fuse_regions(&morph.regions, &cam_regions) {
        Ok(fused) => {
            let p = make_prompt(&fused, id, config.prompt_kind, config.prompt_seed, config.prompt_points);
            fs::write(dir.join("prompt.json"), p.to_json()? + "\n").map_err(|e| Error::io(dir, e))?;
            let seg = match provider.segment(id, &p, w, h) {
                Ok(m) => m,
                Err(e) => {
                    provider_errors.push(e.to_string());
                    BinaryMask::new(w, h)
                }
            };
            save_mask_png(&seg, dir.join("segmenter.png"))?;
            let (mask, source) = select_final(&seg, &fused.chosen)?;
            if source == FinalSource::Fallback {
                flags.push(FLAG_FALLBACK.into());
            }
            fusion_source = Some(fused.source);
            overlap_table = fused.overlap_table;
            prompt = Some(p);
            final_source = Some(source);
            mask
        }
        Err(Error::NoLesionEvidence) => {
            flags.push(FLAG_NO_EVIDENCE.into());
            BinaryMask::new(w, h)
        }
        Err(Error::EmptyCam) => {
            flags.push(FLAG_CAM_EMPTY.into());
            BinaryMask::new(w, h)
        }
        Err(e) => return Err(e),
    };
    if !provider_errors.is_empty() {
        flags.insert(0, FLAG_PROVIDER_ERROR.into());
    }
    save_mask_png(&final_mask, dir.join(FINAL_MASK_FILE))?;

    let mut sample = MetricSample::compute(id, &final_mask, &gt, config.hd95_mode)?;
    flags.append(&mut sample.flags);
    sample.flags = flags;
    let record = ImageRecord {
        image_id: id.to_owned(),
        fingerprint,
        width: w,
        height: h,
        original_width: ow,
        original_height: oh,
        morph_candidates: morph.candidates.len(),
        morph_regions: morph.regions.len(),
        cam_regions: cam_regions.len(),
        fusion_source,
        overlap_table,
        prompt,
        final_source,
        provider_errors,
        sample,
    };
    let tmp = dir.join(format!("{RECORD_FILE}.tmp"));
    write_json(&record, &tmp)?;
    fs::rename(&tmp, dir.join(RECORD_FILE)).map_err(|e| Error::io(dir, e))?;
    Ok(record)
}

fn process_or_reuse(
    entry: &ManifestEntry,
    config: &PipelineConfig,
    provider: &dyn Provider,
    run_dir: &Path,
    force: bool,
) -> Result<(ImageRecord, bool)> {
    let dir = image_dir(run_dir, &entry.image_id);
    let fp = fingerprint(config, entry, provider)?;
    if !force {
        if let Some(rec) = load_record(&dir) {
            if rec.fingerprint == fp && dir.join(FINAL_MASK_FILE).is_file() {
                return Ok((rec, true));
            }
        }
    }
    Ok((process_image(entry, config, provider, &dir, fp)?, false))
}

/// Processes every manifest entry under `out_root/<run-dir>` and writes
/// `report.json` / `report.csv`. Images whose record matches the current
/// fingerprint are reused, so an interrupted run resumes where it stopped.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    provider: &dyn Provider,
    out_root: &Path,
    opts: RunOptions,
) -> Result<RunOutput> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::EmptyInput);
    }
    let run_dir = out_root.join(run_dir_name(config, manifest));
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    fs::write(run_dir.join(CONFIG_FILE), config.to_toml()).map_err(|e| Error::io(&run_dir, e))?;
    manifest.write(&run_dir.join(MANIFEST_FILE))?;

    let work = || {
        use rayon::prelude::*;
        manifest
            .entries
            .par_iter()
            .map(|e| process_or_reuse(e, config, provider, &run_dir, opts.force))
            .collect::<Result<Vec<_>>>()
    };
    let results = if opts.jobs == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidParam(e.to_string()))?
            .install(work)?
    };
    let reused = results.iter().filter(|(_, r)| *r).count();
    let records: Vec<ImageRecord> = results.into_iter().map(|(r, _)| r).collect();
    let report = EvalReport::from_samples(
        records.iter().map(|r| r.sample.clone()).collect(),
        &config.eval_options(),
    )?;
    report.write_json(&run_dir.join(REPORT_JSON))?;
    report.write_csv(&run_dir.join(REPORT_CSV))?;
    Ok(RunOutput {
        run_dir,
        report,
        records,
        reused,
    })
}
