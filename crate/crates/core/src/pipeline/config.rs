use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camloc::{CamMethod, DEFAULT_CAM_THRESHOLD};
use crate::enhance::{auto_stride, AceParams};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Hd95Mode, DEFAULT_RESAMPLES};
use crate::fuse::{PromptKind, DEFAULT_POINT_COUNT, MAX_POINT_COUNT};
use crate::morphseg::{BinarizeOperand, MorphFilterParams, MorphParams};

/// Environment variable that replaces every seed in the configuration.
pub const SEED_ENV: &str = "LESIONSEG_SEED";

/// Every stage parameter, as flat keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ace_alpha: f64,
    /// 0 picks `ceil(max_side / 128)`.
    pub ace_stride: usize,
    pub kmeans_k: usize,
    pub kmeans_seed: u64,
    pub bin_threshold: u8,
    pub bin_operand: BinarizeOperand,
    pub top_band: f64,
    pub bottom_band: f64,
    pub min_ratio: f64,
    pub cam_method: CamMethod,
    pub cam_threshold: f64,
    pub prompt_kind: PromptKind,
    pub prompt_seed: u64,
    pub prompt_points: usize,
    pub bootstrap_n: usize,
    pub bootstrap_seed: u64,
    pub hd95_mode: Hd95Mode,
    pub resize_width: usize,
    pub resize_height: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let filter = MorphFilterParams::default();
        Self {
            ace_alpha: 5.0,
            ace_stride: 0,
            kmeans_k: 2,
            kmeans_seed: 0,
            bin_threshold: filter.bin_threshold,
            bin_operand: BinarizeOperand::default(),
            top_band: filter.top_band,
            bottom_band: filter.bottom_band,
            min_ratio: filter.min_ratio,
            cam_method: CamMethod::LayerCam,
            cam_threshold: DEFAULT_CAM_THRESHOLD,
            prompt_kind: PromptKind::Box,
            prompt_seed: 0,
            prompt_points: DEFAULT_POINT_COUNT,
            bootstrap_n: DEFAULT_RESAMPLES,
            bootstrap_seed: 0,
            hd95_mode: Hd95Mode::MaxDirected,
            resize_width: 256,
            resize_height: 256,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Applies one `key=value` override. The value is read as a TOML
    /// literal, falling back to a bare string (`prompt_kind=points`).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut table = toml::Table::try_from(&*self).expect("flat config serializes");
        if !table.contains_key(key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        table.insert(key.to_string(), value);
        let updated: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn set_all_seeds(&mut self, seed: u64) {
        self.kmeans_seed = seed;
        self.prompt_seed = seed;
        self.bootstrap_seed = seed;
    }

    /// Honors [`SEED_ENV`] when `value` (its content) is present.
    pub fn apply_seed_env(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
            self.set_all_seeds(seed);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.ace_alpha.is_finite() && self.ace_alpha > 0.0) {
            return bad(format!("ace_alpha {} must be positive", self.ace_alpha));
        }
        if self.kmeans_k < 2 {
            return bad(format!("kmeans_k {} must be at least 2", self.kmeans_k));
        }
        if !(0.0..=255.0).contains(&self.cam_threshold) {
            return bad(format!("cam_threshold {} outside [0, 255]", self.cam_threshold));
        }
        if !(1..=MAX_POINT_COUNT).contains(&self.prompt_points) {
            return bad(format!(
                "prompt_points {} outside [1, {MAX_POINT_COUNT}]",
                self.prompt_points
            ));
        }
        if self.bootstrap_n == 0 {
            return bad("bootstrap_n must be positive".into());
        }
        if self.resize_width == 0 || self.resize_height == 0 {
            return bad("resize target must be non-zero".into());
        }
        self.filter().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn filter(&self) -> MorphFilterParams {
        MorphFilterParams {
            bin_threshold: self.bin_threshold,
            bottom_band: self.bottom_band,
            top_band: self.top_band,
            min_ratio: self.min_ratio,
        }
    }

    pub fn morph_params(&self) -> MorphParams<f32> {
        let (w, h) = (self.resize_width, self.resize_height);
        let stride = if self.ace_stride == 0 {
            auto_stride(w, h)
        } else {
            self.ace_stride
        };
        MorphParams {
            ace: AceParams {
                alpha: self.ace_alpha as f32,
                sample_stride: stride,
            },
            k: self.kmeans_k,
            seed: self.kmeans_seed,
            filter: self.filter(),
            operand: self.bin_operand,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            n_bootstrap: self.bootstrap_n,
            seed: self.bootstrap_seed,
            hd95_mode: self.hd95_mode,
        }
    }

    /// Canonical serialization used for content addressing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
