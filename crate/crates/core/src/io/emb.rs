//! `EMB1` container, little-endian throughout:
//!
//! ```text
//! magic "EMB1" | u32 dim | u32 flags | u64 count | 16 bytes digest (ASCII, NUL padded)
//! count × ( u32 frame | u32 index | dim × f32 )
//! ```
//!
//! Detection embeddings are keyed by (frame, position within the frame).
//! Gallery and track appearance files use frame 0 and index = entry number
//! or track id.

use std::collections::BTreeMap;
use std::path::Path;

use super::write_atomic;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::tracker::{Detection, TrackHistory};

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
/// Set when the file need not cover every detection.
pub const EMB_FLAG_PARTIAL: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub partial: bool,
    pub digest: Option<String>,
    pub records: BTreeMap<(u32, u32), Embedding>,
}

impl EmbeddingFile {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            partial: false,
            digest: None,
            records: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: (u32, u32), e: Embedding) -> Result<()> {
        if e.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "embedding dimension {} does not match file dimension {}",
                e.dim(),
                self.dim
            )));
        }
        self.records.insert(key, e);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * (8 + 4 * self.dim));
        out.extend_from_slice(EMB_MAGIC);
        out.extend_from_slice(&dim_u32(self.dim)?.to_le_bytes());
        out.extend_from_slice(&(if self.partial { EMB_FLAG_PARTIAL } else { 0 }).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        let mut digest = [0u8; 16];
        if let Some(d) = &self.digest {
            if d.len() > 16 || !d.is_ascii() {
                return Err(Error::InvalidInput(format!("digest {d:?} does not fit the 16-byte field")));
            }
            digest[..d.len()].copy_from_slice(d.as_bytes());
        }
        out.extend_from_slice(&digest);
        for ((frame, index), e) in &self.records {
            out.extend_from_slice(&frame.to_le_bytes());
            out.extend_from_slice(&index.to_le_bytes());
            for v in e.to_f32() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decodes and normalizes every vector. `path` is only used in messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |message: String| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != EMB_MAGIC {
            return Err(fail(format!("bad magic {:?}", &bytes[..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let dim = u32_at(4) as usize;
        let flags = u32_at(8);
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if dim == 0 {
            return Err(fail("dimension is 0".into()));
        }
        if flags & !EMB_FLAG_PARTIAL != 0 {
            return Err(fail(format!("unknown flags {flags:#x}")));
        }
        let raw_digest = &bytes[20..36];
        let end = raw_digest.iter().position(|&b| b == 0).unwrap_or(16);
        let digest = match std::str::from_utf8(&raw_digest[..end]) {
            Ok("") => None,
            Ok(s) => Some(s.to_string()),
            Err(_) => return Err(fail("digest field is not text".into())),
        };
        let record_len = 8 + 4 * dim;
        let body = &bytes[HEADER_LEN..];
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(record_len))
            .ok_or_else(|| fail(format!("record count {count} overflows")))?;
        if body.len() != expected {
            return Err(fail(format!(
                "header declares {count} records of {record_len} bytes but body has {} bytes",
                body.len()
            )));
        }
        let mut records = BTreeMap::new();
        for (i, rec) in body.chunks_exact(record_len).enumerate() {
            let frame = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let index = u32::from_le_bytes(rec[4..8].try_into().unwrap());
            let values: Vec<f32> = rec[8..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let e = Embedding::from_f32(&values).map_err(|e| fail(format!("record {i}: {e}")))?;
            if records.insert((frame, index), e).is_some() {
                return Err(fail(format!("duplicate record for frame {frame}, index {index}")));
            }
        }
        Ok(Self {
            dim,
            partial: flags & EMB_FLAG_PARTIAL != 0,
            digest,
            records,
        })
    }
}

fn dim_u32(dim: usize) -> Result<u32> {
    u32::try_from(dim)
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::InvalidInput(format!("embedding dimension {dim} out of range")))
}

fn frame_u32(frame: i64) -> Result<u32> {
    u32::try_from(frame).map_err(|_| Error::InvalidInput(format!("frame {frame} cannot be stored in an embedding file")))
}

pub fn write_embeddings(path: &Path, file: &EmbeddingFile) -> Result<()> {
    write_atomic(path, &file.to_bytes()?)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingFile::from_bytes(&bytes, path)
}

/// Embeddings carried by `detections`; partial when any detection has none.
/// Returns `None` when no detection has an embedding.
pub fn detection_embeddings(detections: &BTreeMap<i64, Vec<Detection>>) -> Result<Option<EmbeddingFile>> {
    let mut file: Option<EmbeddingFile> = None;
    let mut missing = false;
    for (frame, dets) in detections {
        for (i, d) in dets.iter().enumerate() {
            match &d.embedding {
                Some(e) => {
                    let f = file.get_or_insert_with(|| EmbeddingFile::new(e.dim()));
                    f.insert((frame_u32(*frame)?, i as u32), e.clone())?;
                }
                None => missing = true,
            }
        }
    }
    if let Some(f) = &mut file {
        f.partial = missing;
    }
    Ok(file)
}

/// Attaches (frame, index) records to detections. Every record must name an
/// existing detection; unless the file is partial every detection must be
/// covered.
pub fn attach_embeddings(detections: &mut BTreeMap<i64, Vec<Detection>>, file: &EmbeddingFile) -> Result<()> {
    for ((frame, index), e) in &file.records {
        let d = detections
            .get_mut(&(*frame as i64))
            .and_then(|v| v.get_mut(*index as usize))
            .ok_or_else(|| {
                Error::InvalidInput(format!("embedding for frame {frame}, index {index} has no detection"))
            })?;
        d.embedding = Some(e.clone());
    }
    if !file.partial {
        let total: usize = detections.values().map(Vec::len).sum();
        if file.records.len() != total {
            return Err(Error::InvalidInput(format!(
                "embedding file covers {} of {total} detections and is not marked partial",
                file.records.len()
            )));
        }
    }
    Ok(())
}

/// Appearance sidecar for tracks: frame 0, index = track id.
pub fn track_appearance(tracks: &[TrackHistory], digest: Option<&str>) -> Result<Option<EmbeddingFile>> {
    let mut file: Option<EmbeddingFile> = None;
    let mut missing = false;
    for t in tracks {
        match &t.appearance {
            Some(e) => {
                let id = u32::try_from(t.id)
                    .map_err(|_| Error::InvalidInput(format!("track id {} too large for the sidecar", t.id)))?;
                file.get_or_insert_with(|| EmbeddingFile::new(e.dim())).insert((0, id), e.clone())?;
            }
            None => missing = true,
        }
    }
    if let Some(f) = &mut file {
        f.partial = missing;
        f.digest = digest.map(str::to_string);
    }
    Ok(file)
}

pub fn attach_track_appearance(tracks: &mut [TrackHistory], file: &EmbeddingFile) -> Result<()> {
    for ((frame, id), e) in &file.records {
        let t = tracks
            .iter_mut()
            .find(|t| *frame == 0 && t.id == *id as u64)
            .ok_or_else(|| Error::InvalidInput(format!("appearance record for unknown track {id}")))?;
        t.appearance = Some(e.clone());
    }
    Ok(())
}
