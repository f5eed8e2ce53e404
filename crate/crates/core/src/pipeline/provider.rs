use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::DatasetManifest;
use super::sha256_hex;
use crate::camloc::CamTensors;
use crate::error::{Error, Result};
use crate::fuse::{PromptKind, PromptSpec};
use crate::imagecore::{
    connected_components, load_mask_png, load_png, read_tensor, resize_mask, save_mask_png, write_tensor, BinaryMask,
};
use crate::synth::oracle_cam_tensors;

/// Source of the two neural stages: CAM tensors and promptable-segmenter
/// masks.
pub trait Provider: Sync {
    /// Identifies everything this provider would return for `image_id`;
    /// part of the per-image cache key.
    fn fingerprint(&self, image_id: &str) -> Result<String>;

    fn cam_tensors(&self, image_id: &str) -> Result<CamTensors<f32>>;

    /// Mask at `width x height` for the given prompt.
    fn segment(&self, image_id: &str, prompt: &PromptSpec, width: usize, height: usize) -> Result<BinaryMask>;
}

pub const ACT_SUFFIX: &str = ".act.ten";
pub const GRAD_SUFFIX: &str = ".grad.ten";
pub const SAM_SUFFIX: &str = ".sam.png";

/// Reads `<id>.act.ten`, `<id>.grad.ten` and `<id>.sam.png` from a
/// directory produced offline by the model sidecar. The segmenter mask is
/// prompt-independent here: the sidecar has already consumed the prompts.
#[derive(Debug, Clone)]
pub struct DirProvider {
    root: PathBuf,
}

impl DirProvider {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::MissingFile(root));
        }
        Ok(Self { root })
    }

    pub fn path(&self, image_id: &str, suffix: &str) -> PathBuf {
        self.root.join(format!("{image_id}{suffix}"))
    }
}

impl Provider for DirProvider {
    fn fingerprint(&self, image_id: &str) -> Result<String> {
        let mut text = String::from("dir");
        for suffix in [ACT_SUFFIX, GRAD_SUFFIX, SAM_SUFFIX] {
            let p = self.path(image_id, suffix);
            let part = match fs::read(&p) {
                Ok(bytes) => sha256_hex(&bytes),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => "absent".into(),
                Err(e) => return Err(Error::io(p, e)),
            };
            text.push(':');
            text.push_str(&part);
        }
        Ok(sha256_hex(text.as_bytes()))
    }

    fn cam_tensors(&self, image_id: &str) -> Result<CamTensors<f32>> {
        let act = read_tensor(self.path(image_id, ACT_SUFFIX))?;
        let grad = read_tensor(self.path(image_id, GRAD_SUFFIX))?;
        CamTensors::from_files(&act, &grad)
    }

    fn segment(&self, image_id: &str, _prompt: &PromptSpec, width: usize, height: usize) -> Result<BinaryMask> {
        let mask = load_mask_png(self.path(image_id, SAM_SUFFIX))?;
        if (mask.width(), mask.height()) == (width, height) {
            Ok(mask)
        } else {
            resize_mask(&mask, width, height)
        }
    }
}

/// Oracle provider built from ground truth: CAM tensors are the blurred
/// ground truth, and the segmenter returns the ground truth inside the
/// prompt box (or the ground-truth components hit by the prompt points).
#[derive(Debug, Clone)]
pub struct MockProvider {
    gts: BTreeMap<String, BinaryMask>,
    channels: usize,
    grid: usize,
    empty_segmenter: BTreeSet<String>,
    failing: BTreeSet<String>,
}

impl MockProvider {
    pub const DEFAULT_CHANNELS: usize = 4;
    pub const DEFAULT_GRID: usize = 16;

    pub fn new(gts: BTreeMap<String, BinaryMask>) -> Self {
        Self {
            gts,
            channels: Self::DEFAULT_CHANNELS,
            grid: Self::DEFAULT_GRID,
            empty_segmenter: BTreeSet::new(),
            failing: BTreeSet::new(),
        }
    }

    /// Loads and resizes every manifest ground truth to `width x height`.
    pub fn from_manifest(manifest: &DatasetManifest, width: usize, height: usize) -> Result<Self> {
        let mut gts = BTreeMap::new();
        for e in &manifest.entries {
            let img = load_png::<f32>(&e.image_path)?;
            let gt = e.load_gt(img.width(), img.height())?;
            gts.insert(e.image_id.clone(), resize_mask(&gt, width, height)?);
        }
        Ok(Self::new(gts))
    }

    /// The segmenter returns an empty mask for this image.
    pub fn with_empty_segmenter(mut self, image_id: &str) -> Self {
        self.empty_segmenter.insert(image_id.to_owned());
        self
    }

    /// Every call for this image fails.
    pub fn with_failure(mut self, image_id: &str) -> Self {
        self.failing.insert(image_id.to_owned());
        self
    }

    fn gt(&self, image_id: &str) -> Result<&BinaryMask> {
        if self.failing.contains(image_id) {
            return Err(Error::Provider(format!("mock failure for {image_id}")));
        }
        self.gts
            .get(image_id)
            .ok_or_else(|| Error::Provider(format!("no ground truth for {image_id}")))
    }

    /// Writes `<id>.act.ten`, `<id>.grad.ten` and `<id>.sam.png` (the full
    /// ground truth) so a [`DirProvider`] can replay this provider.
    pub fn write_dir(&self, root: &Path) -> Result<()> {
        for (id, gt) in &self.gts {
            let dir = DirProvider {
                root: root.to_path_buf(),
            };
            if let Some(parent) = dir.path(id, ACT_SUFFIX).parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let (act, grad) = oracle_cam_tensors(gt, self.channels, self.grid)?;
            write_tensor(&act, dir.path(id, ACT_SUFFIX))?;
            write_tensor(&grad, dir.path(id, GRAD_SUFFIX))?;
            save_mask_png(gt, dir.path(id, SAM_SUFFIX))?;
        }
        Ok(())
    }
}

impl Provider for MockProvider {
    fn fingerprint(&self, image_id: &str) -> Result<String> {
        let gt = self.gt(image_id)?;
        let bits: Vec<u8> = gt.data().iter().map(|&b| b as u8).collect();
        let text = format!(
            "mock:{}:{}:{}x{}:{}:{}",
            self.channels,
            self.grid,
            gt.width(),
            gt.height(),
            sha256_hex(&bits),
            self.empty_segmenter.contains(image_id)
        );
        Ok(sha256_hex(text.as_bytes()))
    }

    fn cam_tensors(&self, image_id: &str) -> Result<CamTensors<f32>> {
        let (act, grad) = oracle_cam_tensors(self.gt(image_id)?, self.channels, self.grid)?;
        CamTensors::from_files(&act, &grad)
    }

    fn segment(&self, image_id: &str, prompt: &PromptSpec, width: usize, height: usize) -> Result<BinaryMask> {
        let gt = resize_mask(self.gt(image_id)?, width, height)?;
        let mut out = BinaryMask::new(width, height);
        if self.empty_segmenter.contains(image_id) {
            return Ok(out);
        }
        match prompt.kind {
            PromptKind::Box => {
                let [x0, y0, x1, y1] = prompt
                    .bbox
                    .ok_or_else(|| Error::Provider("box prompt without box".into()))?;
                for (r, c) in gt.pixels() {
                    if (y0..=y1).contains(&r) && (x0..=x1).contains(&c) {
                        out.set(r, c, true);
                    }
                }
            }
            PromptKind::Points => {
                let points = prompt.points.as_deref().unwrap_or_default();
                for region in connected_components(&gt) {
                    if points.iter().any(|&[x, y]| region.contains(y, x)) {
                        for &(r, c) in region.pixels() {
                            out.set(r, c, true);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camloc::layercam;

    fn gt() -> BinaryMask {
        let mut m = BinaryMask::new(8, 8);
        for r in 2..6 {
            for c in 1..7 {
                m.set(r, c, true);
            }
        }
        m.set(7, 7, true);
        m
    }

    fn prompt(kind: PromptKind) -> PromptSpec {
        PromptSpec {
            image_id: "a".into(),
            kind,
            bbox: (kind == PromptKind::Box).then_some([0, 0, 3, 3]),
            points: (kind == PromptKind::Points).then(|| vec![[7, 7]]),
            seed: 0,
        }
    }

    #[test]
    fn mock_segmenter_policies() {
        let p = MockProvider::new(BTreeMap::from([("a".to_string(), gt())]));
        let m = p.segment("a", &prompt(PromptKind::Box), 8, 8).unwrap();
        assert_eq!(m.area(), 2 * 3);
        assert!(m.get(2, 1) && m.get(3, 3) && !m.get(2, 4));
        let m = p.segment("a", &prompt(PromptKind::Points), 8, 8).unwrap();
        assert_eq!(m.area(), 1);
        let empty = p.clone().with_empty_segmenter("a");
        assert!(empty.segment("a", &prompt(PromptKind::Box), 8, 8).unwrap().is_blank());
        assert_ne!(empty.fingerprint("a").unwrap(), p.fingerprint("a").unwrap());
        assert!(p.clone().with_failure("a").cam_tensors("a").is_err());
        assert!(p.segment("b", &prompt(PromptKind::Box), 8, 8).is_err());
    }

    #[test]
    fn dir_provider_replays_mock() {
        let tmp = tempfile::tempdir().unwrap();
        let mock = MockProvider::new(BTreeMap::from([("benign/a".to_string(), gt())]));
        mock.write_dir(tmp.path()).unwrap();
        let dir = DirProvider::new(tmp.path()).unwrap();
        assert!(tmp.path().join("benign/a.act.ten").is_file());
        let from_dir = layercam(&dir.cam_tensors("benign/a").unwrap());
        let from_mock = layercam(&mock.cam_tensors("benign/a").unwrap());
        assert_eq!(from_dir, from_mock);
        assert_eq!(dir.segment("benign/a", &prompt(PromptKind::Box), 8, 8).unwrap(), gt());
        assert_eq!(
            dir.segment("benign/a", &prompt(PromptKind::Box), 16, 16)
                .unwrap()
                .area(),
            4 * gt().area()
        );

        let before = dir.fingerprint("benign/a").unwrap();
        fs::remove_file(tmp.path().join("benign/a.sam.png")).unwrap();
        assert_ne!(dir.fingerprint("benign/a").unwrap(), before);
        assert!(matches!(
            dir.segment("benign/a", &prompt(PromptKind::Box), 8, 8),
            Err(Error::MissingFile(_))
        ));
        assert!(DirProvider::new(tmp.path().join("nope")).is_err());
    }
}
