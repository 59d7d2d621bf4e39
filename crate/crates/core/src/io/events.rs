//! Events as JSON lines, one self-describing record per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_atomic};
use crate::config::ENGINE_VERSION;
use crate::error::{Error, Result};
use crate::events::EventRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReportLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    pub engine_version: String,
    #[serde(flatten)]
    pub event: EventRecord,
}

pub fn write_events(path: &Path, scenario: Option<&str>, digest: Option<&str>, events: &[EventRecord]) -> Result<()> {
    let mut s = String::new();
    for e in events {
        let line = EventReportLine {
            scenario: scenario.map(str::to_string),
            digest: digest.map(str::to_string),
            engine_version: ENGINE_VERSION.to_string(),
            event: e.clone(),
        };
        s.push_str(&serde_json::to_string(&line).map_err(|e| Error::InvalidInput(e.to_string()))?);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Reads all records. Every line must carry the same digest (or none).
pub fn read_events(path: &Path) -> Result<(Option<String>, Vec<EventRecord>)> {
    let text = read_text(path)?;
    let mut digest: Option<Option<String>> = None;
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let line: EventReportLine = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        match &digest {
            Some(d) if *d != line.digest => return Err(parse_err("config digest differs from earlier lines".into())),
            Some(_) => {}
            None => digest = Some(line.digest.clone()),
        }
        events.push(line.event);
    }
    Ok((digest.flatten(), events))
}
