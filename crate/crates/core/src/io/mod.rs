//! On-disk formats: MOT-style text rows, the `EMB1` embedding container,
//! line-delimited event records and the identity gallery pair.
//!
//! Every writer replaces its target atomically (temp file in the same
//! directory, then rename). Text outputs carry `#` comment lines with the
//! engine version, config digest and the full config echo.

mod emb;
mod events;
mod gallery;
mod mot;

use std::io::Write;
use std::path::Path;

pub use emb::{
    attach_embeddings, attach_track_appearance, detection_embeddings, read_embeddings, track_appearance,
    write_embeddings, EmbeddingFile, EMB_FLAG_PARTIAL, EMB_MAGIC,
};
pub use events::{read_events, write_events, EventReportLine};
pub use gallery::{labels_path, read_gallery, write_gallery};
pub use mot::{
    parse_mot, read_detections, read_tracks, write_detections, write_tracks, LabelTable, MotFile, MotRow,
};

use crate::config::{PipelineConfig, ENGINE_VERSION};
use crate::error::{Error, Result};

/// Where an artifact came from: engine version and config digest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub engine_version: Option<String>,
    pub digest: Option<String>,
    /// Canonical `key = value` lines of the producing config.
    pub config: Vec<String>,
}

impl Provenance {
    pub fn for_config(cfg: &PipelineConfig) -> Self {
        Self {
            engine_version: Some(ENGINE_VERSION.to_string()),
            digest: Some(cfg.digest()),
            config: cfg.canonical().lines().map(str::to_string).collect(),
        }
    }

    /// Engine version only; used for inputs such as simulated ground truth.
    pub fn engine_only() -> Self {
        Self {
            engine_version: Some(ENGINE_VERSION.to_string()),
            ..Self::default()
        }
    }

    pub(crate) fn comment_lines(&self) -> String {
        let mut s = String::new();
        if let Some(v) = &self.engine_version {
            s.push_str(&format!("# engine littertrack {v}\n"));
        }
        if let Some(d) = &self.digest {
            s.push_str(&format!("# digest {d}\n"));
        }
        for line in &self.config {
            s.push_str(&format!("# config {line}\n"));
        }
        s
    }

    /// Picks up recognized comment lines; others are ignored.
    pub(crate) fn absorb(&mut self, comment: &str) {
        let c = comment.trim();
        if let Some(v) = c.strip_prefix("engine littertrack ") {
            self.engine_version = Some(v.trim().to_string());
        } else if let Some(d) = c.strip_prefix("digest ") {
            self.digest = Some(d.trim().to_string());
        } else if let Some(line) = c.strip_prefix("config ") {
            self.config.push(line.to_string());
        }
    }
}

/// Rejects artifacts produced under different configs. Artifacts without a
/// digest (third-party files, ground truth) are not checked.
pub fn check_digests<'a>(artifacts: impl IntoIterator<Item = (&'a Path, Option<&'a str>)>) -> Result<Option<String>> {
    let mut seen: Option<(&Path, &str)> = None;
    for (path, digest) in artifacts {
        let Some(d) = digest else {
            log::warn!("{}: no config digest; provenance not checked", path.display());
            continue;
        };
        match seen {
            Some((p, s)) if s != d => {
                return Err(Error::Config(format!(
                    "config digest mismatch: {} has {s}, {} has {d}",
                    p.display(),
                    path.display()
                )))
            }
            Some(_) => {}
            None => seen = Some((path, d)),
        }
    }
    Ok(seen.map(|(_, d)| d.to_string()))
}

/// Writes `bytes` to a temp file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_comment_round_trip() {
        let p = Provenance::for_config(&PipelineConfig::default());
        let mut q = Provenance::default();
        for line in p.comment_lines().lines() {
            q.absorb(line.strip_prefix('#').unwrap());
        }
        assert_eq!(p, q);
    }

    #[test]
    fn digest_check() {
        let a = Path::new("a");
        let b = Path::new("b");
        assert_eq!(check_digests([(a, Some("x")), (b, None)]).unwrap().as_deref(), Some("x"));
        assert!(check_digests([(a, Some("x")), (b, Some("y"))]).is_err());
        assert_eq!(check_digests([(a, None)]).unwrap(), None);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
