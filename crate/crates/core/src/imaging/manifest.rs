//! Dataset manifests.
//!
//! On disk a manifest is UTF-8 text: `#`-prefixed header lines carrying the
//! geometry (`# scale=4`, `# hr_size=256`, `# lr_size=64`) followed by one
//! `source_id<TAB>path<TAB>split` line per image. Relative paths resolve
//! against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::image::load_image;
use super::pair::{center_origin, make_pair, PairGeometry, TrainingPair};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub scale: usize,
    pub hr_size: usize,
    pub lr_size: usize,
    /// Files that were present but not decodable; not serialized.
    pub skipped: Vec<SkippedFile>,
}

impl DatasetManifest {
    pub fn new(scale: usize, hr_size: usize) -> Result<Self> {
        let geom = PairGeometry { hr_size, scale };
        geom.validate()?;
        Ok(Self {
            entries: Vec::new(),
            scale,
            hr_size,
            lr_size: geom.lr_size(),
            skipped: Vec::new(),
        })
    }

    pub fn geometry(&self) -> PairGeometry {
        PairGeometry {
            hr_size: self.hr_size,
            scale: self.scale,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: ManifestEntry) -> Result<()> {
        if self.entries.iter().any(|e| e.source_id == entry.source_id) {
            return Err(Error::Format(format!("duplicate source id {:?}", entry.source_id)));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Marks roughly `fraction` of the entries as test data, chosen by a
    /// stable hash of the source id.
    pub fn assign_splits(&mut self, fraction: f64) {
        let cut = (fraction.clamp(0.0, 1.0) * u32::MAX as f64) as u64;
        for e in &mut self.entries {
            let h = seed::fnv1a(e.source_id.as_bytes()) & 0xFFFF_FFFF;
            e.split = if h < cut { Split::Test } else { Split::Train };
        }
    }

    pub fn filter(&self, split: Split) -> DatasetManifest {
        DatasetManifest {
            entries: self.entries.iter().filter(|e| e.split == split).cloned().collect(),
            skipped: Vec::new(),
            ..self.clone()
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# srunc manifest v1\n# scale={}\n# hr_size={}\n# lr_size={}\n",
            self.scale, self.hr_size, self.lr_size
        );
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.source_id, e.path.to_string_lossy(), e.split));
        }
        out
    }

    /// Parses manifest text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut scale = None;
        let mut hr_size = None;
        let mut lr_size = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if let Some((k, v)) = header.trim().split_once('=') {
                    let v: usize = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Format(format!("line {}: bad value {v:?}", lineno + 1)))?;
                    match k.trim() {
                        "scale" => scale = Some(v),
                        "hr_size" => hr_size = Some(v),
                        "lr_size" => lr_size = Some(v),
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let mut path = PathBuf::from(fields[1]);
            if let (Some(base), true) = (base, path.is_relative()) {
                path = base.join(path);
            }
            entries.push(ManifestEntry {
                source_id: fields[0].to_string(),
                path,
                split: fields[2].parse()?,
            });
        }
        let scale = scale.ok_or_else(|| Error::Format("manifest lacks a scale header".into()))?;
        let hr_size = hr_size.ok_or_else(|| Error::Format("manifest lacks an hr_size header".into()))?;
        let mut m = DatasetManifest::new(scale, hr_size)?;
        if let Some(lr) = lr_size {
            if lr != m.lr_size {
                return Err(Error::Format(format!(
                    "lr_size {lr} inconsistent with hr_size {hr_size} / scale {scale}"
                )));
            }
        }
        for e in entries {
            m.push(e)?;
        }
        Ok(m)
    }

    /// Loads every entry and builds its pair from the centered HR crop.
    pub fn load_pairs(&self) -> Result<Vec<TrainingPair>> {
        let geom = self.geometry();
        self.entries
            .iter()
            .map(|e| {
                let img = load_image(&e.path)?;
                let origin = center_origin(&img, self.hr_size)?;
                make_pair(&img, origin, &geom, e.source_id.clone())
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }
}

fn source_id_for(path: &Path, taken: &HashSet<String>) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if !taken.contains(&stem) {
        return stem;
    }
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or(stem)
}

/// Lists every decodable image directly inside `root`, sorted by path.
/// Undecodable files and images smaller than the HR crop are recorded in
/// `skipped`.
pub fn scan_manifest(root: impl AsRef<Path>, scale: usize, hr_size: usize) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut manifest = DatasetManifest::new(scale, hr_size)?;
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let mut taken = HashSet::new();
    for path in paths {
        match load_image(&path) {
            Ok(img) if img.height() < hr_size || img.width() < hr_size => {
                manifest.skipped.push(SkippedFile {
                    path,
                    reason: format!("{}x{} is smaller than the {hr_size}px crop", img.height(), img.width()),
                });
            }
            Ok(_) => {
                let id = source_id_for(&path, &taken);
                taken.insert(id.clone());
                manifest.push(ManifestEntry {
                    source_id: id,
                    path,
                    split: Split::Train,
                })?;
            }
            Err(e) => manifest.skipped.push(SkippedFile {
                path,
                reason: e.to_string(),
            }),
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{save_image, ImageTensor};

    fn write_images(dir: &Path, n: usize, size: usize) {
        for i in 0..n {
            let img = ImageTensor::constant(size, size, 3, i as f64 / n as f64).unwrap();
            save_image(&img, dir.join(format!("img_{:02}.png", (n - 1 - i)))).unwrap();
        }
    }

    #[test]
    fn scans_sorted_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), 10, 16);
        let m = scan_manifest(dir.path(), 4, 16).unwrap();
        assert_eq!(m.len(), 10);
        let ids: Vec<_> = m.entries.iter().map(|e| e.source_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(m, scan_manifest(dir.path(), 4, 16).unwrap());
    }

    #[test]
    fn corrupt_file_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), 4, 16);
        std::fs::write(dir.path().join("broken.png"), b"\x89PNG not really").unwrap();
        let m = scan_manifest(dir.path(), 4, 16).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.skipped.len(), 1);
        assert!(m.skipped[0].path.ends_with("broken.png"));
    }

    #[test]
    fn empty_dir_and_missing_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(scan_manifest(dir.path(), 4, 16).unwrap().is_empty());
        assert!(matches!(
            scan_manifest(dir.path().join("nope"), 4, 16),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn text_roundtrip() {
        let mut m = DatasetManifest::new(4, 32).unwrap();
        for i in 0..5 {
            m.push(ManifestEntry {
                source_id: format!("s{i}"),
                path: PathBuf::from(format!("hr/s{i}.png")),
                split: Split::Train,
            })
            .unwrap();
        }
        m.assign_splits(0.4);
        let back = DatasetManifest::parse(&m.to_text(), None).unwrap();
        assert_eq!(back, m);
        assert!(DatasetManifest::parse("# scale=4\n# hr_size=30\n", None).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "# scale=4\n# hr_size=32\na\tx.png\ttrain\na\ty.png\ttrain\n";
        assert!(DatasetManifest::parse(text, None).is_err());
    }
}
