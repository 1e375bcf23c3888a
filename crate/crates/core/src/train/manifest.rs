use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
}

impl ManifestEntry {
    /// Short identifier used in reports: the image file stem.
    pub fn id(&self) -> String {
        self.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image.display().to_string())
    }
}

/// `image<TAB>mask` per line. Relative paths are resolved against the
/// manifest's directory; blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(image), Some(mask), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::InvalidArgument(format!(
                    "manifest line {}: expected `image<TAB>mask`",
                    no + 1
                )));
            };
            entries.push(ManifestEntry {
                image: base.join(image.trim()),
                mask: base.join(mask.trim()),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Serializes with paths made relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\n", rel(&e.image), rel(&e.mask)))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_text(path.parent().unwrap_or(Path::new("")));
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails when an image appears in both manifests.
    pub fn check_disjoint(&self, other: &DatasetManifest) -> Result<()> {
        let mine: HashSet<&PathBuf> = self.entries.iter().map(|e| &e.image).collect();
        match other.entries.iter().find(|e| mine.contains(&e.image)) {
            Some(e) => Err(Error::InvalidArgument(format!(
                "{} appears in more than one dataset role",
                e.image.display()
            ))),
            None => Ok(()),
        }
    }
}
