//! MOTChallenge-shaped rows: `frame,id,left,top,width,height,conf,class,visibility`.
//!
//! Raw detections use id −1; track files use positive ids. In track files a
//! visibility of 0 marks an interpolated entry.

use std::collections::BTreeMap;
use std::path::Path;

use super::{read_text, write_atomic, Provenance};
use crate::error::{Error, Result};
use crate::events::{DEFAULT_LITTER_CLASSES, PERSON_CLASS};
use crate::geometry::BoundingBox;
use crate::tracker::{Detection, HistoryEntry, TrackHistory};

/// Numeric class codes. Code `k` maps to the `k`-th token (1-based);
/// non-numeric class fields are taken as tokens verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    tokens: Vec<String>,
}

impl Default for LabelTable {
    /// 1 = person, then the default litter classes in order.
    fn default() -> Self {
        let mut tokens = vec![PERSON_CLASS.to_string()];
        tokens.extend(DEFAULT_LITTER_CLASSES.iter().map(|s| s.to_string()));
        Self { tokens }
    }
}

impl LabelTable {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        for t in &tokens {
            check_token(t).map_err(Error::Config)?;
        }
        Ok(Self { tokens })
    }

    pub fn token(&self, field: &str) -> std::result::Result<String, String> {
        let field = field.trim();
        if let Ok(code) = field.parse::<usize>() {
            return code
                .checked_sub(1)
                .and_then(|i| self.tokens.get(i))
                .cloned()
                .ok_or_else(|| format!("class code {code} is not in the label table"));
        }
        check_token(field)?;
        Ok(field.to_string())
    }

    pub fn code(&self, token: &str) -> String {
        match self.tokens.iter().position(|t| t == token) {
            Some(i) => (i + 1).to_string(),
            None => token.to_string(),
        }
    }
}

fn check_token(t: &str) -> std::result::Result<(), String> {
    let ok = !t.is_empty()
        && !t.starts_with(|c: char| c.is_ascii_digit() || c == '-')
        && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(format!("invalid class token {t:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotRow {
    pub frame: i64,
    pub id: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub class_label: String,
    pub visibility: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotFile {
    pub provenance: Provenance,
    /// Sorted by frame; file order within a frame.
    pub rows: Vec<MotRow>,
}

fn parse_row(line: &str, table: &LabelTable) -> std::result::Result<MotRow, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 || fields.len() > 10 {
        return Err(format!("expected 9 comma-separated fields, found {}", fields.len()));
    }
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let v: f64 = fields[i].parse().map_err(|_| format!("{name}: cannot parse {:?}", fields[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name}: non-finite value"))
        }
    };
    let frame: i64 = fields[0].parse().map_err(|_| format!("frame: cannot parse {:?}", fields[0]))?;
    let id: i64 = fields[1].parse().map_err(|_| format!("id: cannot parse {:?}", fields[1]))?;
    let (w, h) = (num(4, "width")?, num(5, "height")?);
    if w <= 0.0 || h <= 0.0 {
        return Err(format!("non-positive box size {w}x{h}"));
    }
    let bbox = BoundingBox::new(num(2, "left")?, num(3, "top")?, w, h).map_err(|e| e.to_string())?;
    let class_label = match fields.get(7) {
        Some(f) => table.token(f)?,
        None => PERSON_CLASS.to_string(),
    };
    let visibility = if fields.len() > 8 { num(8, "visibility")? } else { 1.0 };
    Ok(MotRow {
        frame,
        id,
        bbox,
        confidence: num(6, "conf")?,
        class_label,
        visibility,
    })
}

/// Parses a MOT text file. Out-of-order frames are reordered (stable) with a
/// warning.
pub fn parse_mot(path: &Path, table: &LabelTable) -> Result<MotFile> {
    let text = read_text(path)?;
    let mut out = MotFile::default();
    let mut last = i64::MIN;
    let mut reordered = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            out.provenance.absorb(c);
            continue;
        }
        let row = parse_row(line, table).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        })?;
        reordered |= row.frame < last;
        last = last.max(row.frame);
        out.rows.push(row);
    }
    if reordered {
        log::warn!("{}: frames are not monotone; reordering", path.display());
        out.rows.sort_by_key(|r| r.frame);
    }
    Ok(out)
}

/// Raw detections grouped by frame, in file order within each frame.
pub fn read_detections(path: &Path, table: &LabelTable) -> Result<(Provenance, BTreeMap<i64, Vec<Detection>>)> {
    let file = parse_mot(path, table)?;
    let mut out: BTreeMap<i64, Vec<Detection>> = BTreeMap::new();
    for r in file.rows {
        out.entry(r.frame)
            .or_default()
            .push(Detection::new(r.frame, r.bbox, r.confidence, r.class_label));
    }
    Ok((file.provenance, out))
}

/// Track histories ordered by id. Appearance is read from a separate sidecar.
pub fn read_tracks(path: &Path, table: &LabelTable) -> Result<(Provenance, Vec<TrackHistory>)> {
    let file = parse_mot(path, table)?;
    let mut tracks: BTreeMap<u64, TrackHistory> = BTreeMap::new();
    for r in file.rows {
        let bad = |message: String| Error::InvalidInput(format!("{}: {message}", path.display()));
        if r.id <= 0 {
            return Err(bad(format!("track id {} at frame {} must be positive", r.id, r.frame)));
        }
        let id = r.id as u64;
        let t = tracks.entry(id).or_insert_with(|| TrackHistory {
            id,
            class_label: r.class_label.clone(),
            appearance: None,
            entries: BTreeMap::new(),
        });
        if t.class_label != r.class_label {
            return Err(bad(format!("track {id} changes class from {} to {}", t.class_label, r.class_label)));
        }
        let entry = HistoryEntry {
            bbox: r.bbox,
            interpolated: r.visibility == 0.0,
        };
        if t.entries.insert(r.frame, entry).is_some() {
            return Err(bad(format!("track {id} has two rows at frame {}", r.frame)));
        }
    }
    Ok((file.provenance, tracks.into_values().collect()))
}

fn row_text(table: &LabelTable, frame: i64, id: i64, b: &BoundingBox, conf: f64, class: &str, vis: f64) -> String {
    format!(
        "{frame},{id},{},{},{},{},{conf},{},{vis}\n",
        b.left,
        b.top,
        b.width,
        b.height,
        table.code(class)
    )
}

pub fn write_detections(
    path: &Path,
    provenance: &Provenance,
    detections: &BTreeMap<i64, Vec<Detection>>,
    table: &LabelTable,
) -> Result<()> {
    let mut s = provenance.comment_lines();
    for (frame, dets) in detections {
        for d in dets {
            s.push_str(&row_text(table, *frame, -1, &d.bbox, d.confidence, &d.class_label, 1.0));
        }
    }
    write_atomic(path, s.as_bytes())
}

/// Rows sorted by (frame, id).
pub fn write_tracks(path: &Path, provenance: &Provenance, tracks: &[TrackHistory], table: &LabelTable) -> Result<()> {
    let mut rows: Vec<(i64, u64, &TrackHistory, &HistoryEntry)> = tracks
        .iter()
        .flat_map(|t| t.entries.iter().map(move |(f, e)| (*f, t.id, t, e)))
        .collect();
    rows.sort_by_key(|(f, id, _, _)| (*f, *id));
    let mut s = provenance.comment_lines();
    for (f, id, t, e) in rows {
        let vis = if e.interpolated { 0.0 } else { 1.0 };
        s.push_str(&row_text(table, f, id as i64, &e.bbox, 1.0, &t.class_label, vis));
    }
    write_atomic(path, s.as_bytes())
}
