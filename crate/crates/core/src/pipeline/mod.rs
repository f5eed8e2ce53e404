//! Dataset ingestion, configuration, providers for the neural stages and
//! the cached, resumable per-image run.

mod config;
mod dataset;
mod overlay;
mod provider;
mod run;

pub use config::{PipelineConfig, SEED_ENV};
pub use dataset::{ingest_busi, validate_image_id, ClassLabel, DatasetManifest, ManifestEntry};
pub use overlay::{emit_overlays, render_overlay, GT_COLOR, PRED_COLOR, SHARED_COLOR, WATERMARK_COLOR};
pub use provider::{DirProvider, MockProvider, Provider, ACT_SUFFIX, GRAD_SUFFIX, SAM_SUFFIX};
pub use run::{
    image_dir, process_image, run_dir_name, run_pipeline, ImageRecord, RunOptions, RunOutput, CONFIG_FILE,
    FINAL_MASK_FILE, FLAG_CAM_EMPTY, FLAG_CAM_NEGATIVE, FLAG_FALLBACK, FLAG_NO_EVIDENCE, FLAG_PROVIDER_ERROR,
    MANIFEST_FILE, RECORD_FILE, REPORT_CSV, REPORT_JSON,
};

use sha2::{Digest, Sha256};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
