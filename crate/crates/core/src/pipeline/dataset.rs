use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{load_mask_png, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Normal,
    Benign,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Normal, ClassLabel::Benign];

    pub fn dir_name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Benign => "benign",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    /// `None` means a lesion-free image: the ground truth is empty.
    pub gt_mask_path: Option<PathBuf>,
    /// Additional masks merged into the ground truth by union.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_mask_paths: Vec<PathBuf>,
    pub class_label: ClassLabel,
}

impl ManifestEntry {
    pub fn mask_paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.gt_mask_path.iter().chain(&self.extra_mask_paths)
    }

    /// Union of every mask file, or an empty mask of the given size.
    pub fn load_gt(&self, width: usize, height: usize) -> Result<BinaryMask> {
        let mut gt = BinaryMask::new(width, height);
        for p in self.mask_paths() {
            gt = gt.union(&load_mask_png(p)?)?;
        }
        Ok(gt)
    }
}

/// Rejects ids that would escape a directory when used as a relative path.
pub fn validate_image_id(id: &str) -> Result<()> {
    let ok =
        !id.is_empty() && !id.contains('\\') && Path::new(id).components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::Dataset(format!("image id {id:?} is not a plain relative name")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            validate_image_id(&e.image_id)?;
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::DuplicateId(e.image_id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("entry serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
        Self::new(entries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Reads a JSONL manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = Self::from_jsonl(&text)?;
        m.check_paths()?;
        Ok(m)
    }

    pub fn check_paths(&self) -> Result<()> {
        for e in &self.entries {
            for p in std::iter::once(&e.image_path).chain(e.mask_paths()) {
                if !p.is_file() {
                    return Err(Error::MissingFile(p.clone()));
                }
            }
        }
        Ok(())
    }

    /// Keeps the entries named in a split file (one id per line, `#`
    /// comments allowed), in manifest order.
    pub fn filter_split(&self, split_text: &str) -> Result<Self> {
        let wanted: HashSet<&str> = split_text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let known: HashSet<&str> = self.entries.iter().map(|e| e.image_id.as_str()).collect();
        if let Some(missing) = wanted.iter().find(|id| !known.contains(**id)) {
            return Err(Error::Dataset(format!("split names unknown image {missing:?}")));
        }
        Self::new(
            self.entries
                .iter()
                .filter(|e| wanted.contains(e.image_id.as_str()))
                .cloned()
                .collect(),
        )
    }

    /// Short content hash of the manifest text.
    pub fn digest(&self) -> String {
        super::sha256_hex(self.to_jsonl().as_bytes())
    }
}

/// `Some(stem)` when `name` is a `<stem>_mask.png` or `<stem>_mask_<n>.png`
/// companion.
fn mask_stem(name: &str) -> Option<&str> {
    let base = name.strip_suffix(".png")?;
    if let Some(stem) = base.strip_suffix("_mask") {
        return Some(stem);
    }
    let (head, n) = base.rsplit_once("_mask_")?;
    (!n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())).then_some(head)
}

/// Builds a manifest from class folders `normal/` and `benign/` under
/// `root`. Images are paired with their `_mask` companions; benign images
/// must have one. Ids are `<class>/<stem>`, ordered by class then path.
/// Other folders (e.g. `malignant/`) are ignored.
pub fn ingest_busi(root: &Path) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut any_class = false;
    for class in ClassLabel::ALL {
        let dir = root.join(class.dir_name());
        if !dir.is_dir() {
            continue;
        }
        any_class = true;
        let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut masks: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            if !path.is_file() || !name.ends_with(".png") {
                continue;
            }
            match mask_stem(&name) {
                Some(stem) => masks.entry(stem.to_owned()).or_default().push(path),
                None => {
                    images.insert(name.trim_end_matches(".png").to_owned(), path);
                }
            }
        }
        if let Some(orphan) = masks.keys().find(|s| !images.contains_key(*s)) {
            return Err(Error::Dataset(format!(
                "mask for {orphan:?} in {} has no image",
                dir.display()
            )));
        }
        for (stem, image_path) in images {
            let mut found = masks.remove(&stem).unwrap_or_default();
            found.sort();
            if found.is_empty() && class == ClassLabel::Benign {
                return Err(Error::Dataset(format!(
                    "benign image {} has no _mask companion",
                    image_path.display()
                )));
            }
            let mut it = found.into_iter();
            entries.push(ManifestEntry {
                image_id: format!("{}/{stem}", class.dir_name()),
                image_path,
                gt_mask_path: it.next(),
                extra_mask_paths: it.collect(),
                class_label: class,
            });
        }
    }
    if !any_class {
        return Err(Error::Dataset(format!(
            "{} has neither normal/ nor benign/ subdirectories",
            root.display()
        )));
    }
    DatasetManifest::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{save_gray8_png, save_mask_png};

    fn touch_png(path: &Path) {
        save_gray8_png(2, 2, &[0, 50, 100, 150], path).unwrap();
    }

    fn touch_mask(path: &Path, on: &[(usize, usize)]) {
        let mut m = BinaryMask::new(2, 2);
        for &(r, c) in on {
            m.set(r, c, true);
        }
        save_mask_png(&m, path).unwrap();
    }

    #[test]
    fn mask_name_rule() {
        assert_eq!(mask_stem("b (1)_mask.png"), Some("b (1)"));
        assert_eq!(mask_stem("b (1)_mask_2.png"), Some("b (1)"));
        assert_eq!(mask_stem("b (1).png"), None);
        assert_eq!(mask_stem("x_mask_.png"), None);
        assert_eq!(mask_stem("x_mask_a.png"), None);
    }

    #[test]
    fn ingests_class_folders() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        for d in ["benign", "normal", "malignant"] {
            fs::create_dir(root.join(d)).unwrap();
        }
        touch_png(&root.join("benign/b (1).png"));
        touch_mask(&root.join("benign/b (1)_mask.png"), &[(0, 0)]);
        touch_mask(&root.join("benign/b (1)_mask_1.png"), &[(1, 1)]);
        touch_png(&root.join("normal/b (1).png"));
        touch_png(&root.join("malignant/m.png"));

        let m = ingest_busi(root).unwrap();
        let ids: Vec<&str> = m.entries.iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(ids, ["normal/b (1)", "benign/b (1)"]);
        let normal = &m.entries[0];
        assert_eq!(normal.gt_mask_path, None);
        assert!(normal.load_gt(2, 2).unwrap().is_blank());
        let benign = &m.entries[1];
        assert_eq!(benign.extra_mask_paths.len(), 1);
        let gt = benign.load_gt(2, 2).unwrap();
        assert_eq!(gt.data(), &[true, false, false, true]);

        let back = DatasetManifest::from_jsonl(&m.to_jsonl()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn benign_without_mask_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir(tmp.path().join("benign")).unwrap();
        touch_png(&tmp.path().join("benign/a.png"));
        assert!(matches!(ingest_busi(tmp.path()), Err(Error::Dataset(_))));
        assert!(matches!(
            ingest_busi(&tmp.path().join("benign")),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn manifest_checks() {
        let e = |id: &str| ManifestEntry {
            image_id: id.into(),
            image_path: PathBuf::from("/nonexistent.png"),
            gt_mask_path: None,
            extra_mask_paths: vec![],
            class_label: ClassLabel::Normal,
        };
        assert!(matches!(
            DatasetManifest::new(vec![e("a"), e("a")]),
            Err(Error::DuplicateId(_))
        ));
        assert!(DatasetManifest::new(vec![e("../x")]).is_err());
        assert!(DatasetManifest::new(vec![e("/abs")]).is_err());
        let m = DatasetManifest::new(vec![e("a"), e("b"), e("c")]).unwrap();
        assert!(matches!(m.check_paths(), Err(Error::MissingFile(_))));
        let s = m.filter_split("# test split\nc\n\na\n").unwrap();
        assert_eq!(
            s.entries.iter().map(|e| e.image_id.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );
        assert!(m.filter_split("zzz").is_err());
    }
}
