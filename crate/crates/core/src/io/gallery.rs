//! Gallery persistence: an `EMB1` file (frame 0, index = entry number) plus a
//! JSON-lines label manifest at `<path>.labels`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::emb::{read_embeddings, EmbeddingFile};
use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::identity::IdentityGallery;

#[derive(Debug, Serialize, Deserialize)]
struct LabelLine {
    index: u32,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<String>,
}

pub fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

pub fn write_gallery(path: &Path, gallery: &IdentityGallery) -> Result<()> {
    let dim = gallery
        .dim()
        .ok_or_else(|| Error::InvalidInput("refusing to write an empty gallery".into()))?;
    let mut file = EmbeddingFile::new(dim);
    let mut manifest = String::new();
    for (i, (label, e)) in gallery.iter().enumerate() {
        file.insert((0, i as u32), e.clone())?;
        let line = LabelLine {
            index: i as u32,
            label: label.to_string(),
            metadata: gallery.metadata(label).map(str::to_string),
        };
        manifest.push_str(&serde_json::to_string(&line).map_err(|e| Error::InvalidInput(e.to_string()))?);
        manifest.push('\n');
    }
    write_atomic(path, &file.to_bytes()?)?;
    write_atomic(&labels_path(path), manifest.as_bytes())
}

/// Loads a gallery. A missing file yields an empty gallery.
pub fn read_gallery(path: &Path) -> Result<IdentityGallery> {
    let mut gallery = IdentityGallery::new();
    if !path.exists() {
        return Ok(gallery);
    }
    let file = read_embeddings(path)?;
    let lpath = labels_path(path);
    let text = read_text(&lpath)?;
    let mut used = 0;
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: lpath.clone(),
            line: n + 1,
            message,
        };
        let line: LabelLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let e = file
            .records
            .get(&(0, line.index))
            .ok_or_else(|| err(format!("no embedding with index {}", line.index)))?;
        gallery
            .enroll(&line.label, e.as_slice(), line.metadata.as_deref())
            .map_err(|e| err(e.to_string()))?;
        used += 1;
    }
    if used != file.records.len() {
        return Err(Error::InvalidInput(format!(
            "{}: {} embeddings but {used} labels",
            path.display(),
            file.records.len()
        )));
    }
    Ok(gallery)
}
