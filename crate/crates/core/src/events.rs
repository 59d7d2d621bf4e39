//! Littering and cleaning detection from person × litter box overlap.
//!
//! Littering: a person's (margin-expanded) box and a litter box are in
//! contact, the overlap drops to zero and stays there, and the two centers
//! move apart. Cleaning: a resting litter box comes into contact with a
//! person and is then displaced vertically.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{center_distance, expand, intersection_area};
use crate::identity::{IdentityGallery, MatchConfig};
use crate::tracker::{HistoryEntry, TrackHistory};

pub const PERSON_CLASS: &str = "person";

pub const DEFAULT_LITTER_CLASSES: [&str; 13] = [
    "bottle",
    "handbag",
    "backpack",
    "umbrella",
    "banana",
    "apple",
    "cup",
    "book",
    "wallet",
    "suitcase",
    "orange",
    "sports_ball",
    "bowl",
];

pub fn default_litter_classes() -> BTreeSet<String> {
    DEFAULT_LITTER_CLASSES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventConfig {
    pub zero_area_epsilon: f64,
    pub separation_window: u32,
    pub min_separation_slope: f64,
    pub min_contact_frames: u32,
    pub vertical_shift_min: f64,
    pub debounce_frames: u32,
    /// Margin added on every side of person boxes before intersecting.
    pub person_margin: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            zero_area_epsilon: 1.0,
            separation_window: 15,
            min_separation_slope: 1.0,
            min_contact_frames: 5,
            vertical_shift_min: 15.0,
            debounce_frames: 5,
            person_margin: 5.0,
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.zero_area_epsilon > 0.0
            && self.separation_window > 0
            && self.min_separation_slope > 0.0
            && self.min_contact_frames > 0
            && self.vertical_shift_min > 0.0
            && self.debounce_frames > 0
            && self.person_margin >= 0.0;
        if !ok {
            return Err(Error::Config("event thresholds must be positive".into()));
        }
        Ok(())
    }

    /// Records after an event frame needed before the event is decided.
    pub fn lookahead(&self) -> usize {
        self.debounce_frames.max(self.separation_window) as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapRecord {
    pub frame: i64,
    pub intersection_area: f64,
    pub centroid_distance: f64,
    pub litter_centroid_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSeries {
    pub person_track: u64,
    pub litter_track: u64,
    pub records: Vec<OverlapRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Littering,
    Cleaning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub frame: i64,
    pub litter_track: u64,
    /// `None` marks an unattributed event.
    pub person_track: Option<u64>,
    pub identity: Option<String>,
    #[serde(default)]
    pub identity_ambiguous: bool,
    pub confidence: f64,
}

impl EventRecord {
    pub fn is_attributed(&self) -> bool {
        self.person_track.is_some()
    }
}

/// Per-frame overlap over the frames where both tracks have a box. Returns
/// `None` when the tracks never share a frame.
pub fn overlap_series(
    person: &TrackHistory,
    litter: &TrackHistory,
    person_margin: f64,
) -> Result<Option<OverlapSeries>> {
    let mut records = Vec::new();
    for (frame, le) in &litter.entries {
        let Some(pe) = person.entries.get(frame) else { continue };
        let grown = expand(&pe.bbox, person_margin)?;
        records.push(OverlapRecord {
            frame: *frame,
            intersection_area: intersection_area(&grown, &le.bbox),
            centroid_distance: center_distance(&pe.bbox, &le.bbox),
            litter_centroid_y: le.bbox.center().1,
        });
    }
    if records.is_empty() {
        return Ok(None);
    }
    Ok(Some(OverlapSeries {
        person_track: person.id,
        litter_track: litter.id,
        records,
    }))
}

fn slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Index-level littering test at record `i`; returns the confidence.
fn littering_at(records: &[OverlapRecord], i: usize, cfg: &EventConfig) -> Option<f64> {
    let eps = cfg.zero_area_epsilon;
    let contact = cfg.min_contact_frames as usize;
    let debounce = cfg.debounce_frames as usize;
    if i < contact || i + debounce > records.len() {
        return None;
    }
    if !records[i - contact..i].iter().all(|r| r.intersection_area > eps) {
        return None;
    }
    if !records[i..i + debounce].iter().all(|r| r.intersection_area <= eps) {
        return None;
    }
    let w = cfg.separation_window as usize;
    let window = &records[i..(i + w).min(records.len())];
    let s = slope(window.iter().map(|r| (r.frame as f64, r.centroid_distance)))?;
    if s < cfg.min_separation_slope {
        return None;
    }
    let coverage = window.len() as f64 / w as f64;
    Some((s / cfg.min_separation_slope * coverage).min(1.0))
}

fn cleaning_at(records: &[OverlapRecord], i: usize, cfg: &EventConfig) -> Option<f64> {
    let eps = cfg.zero_area_epsilon;
    if i == 0 || records[i - 1].intersection_area > eps || records[i].intersection_area <= eps {
        return None;
    }
    let w = cfg.separation_window as usize;
    let y0 = records[i].litter_centroid_y;
    let shift = records[i..(i + w + 1).min(records.len())]
        .iter()
        .map(|r| (r.litter_centroid_y - y0).abs())
        .fold(0.0, f64::max);
    if shift < cfg.vertical_shift_min {
        return None;
    }
    Some((shift / cfg.vertical_shift_min).min(1.0))
}

fn event(series: &OverlapSeries, i: usize, kind: EventKind, confidence: f64) -> EventRecord {
    EventRecord {
        kind,
        frame: series.records[i].frame,
        litter_track: series.litter_track,
        person_track: Some(series.person_track),
        identity: None,
        identity_ambiguous: false,
        confidence,
    }
}

pub fn detect_littering(series: &OverlapSeries, cfg: &EventConfig) -> Vec<EventRecord> {
    detect_upto(series, cfg, series.records.len(), EventKind::Littering)
}

pub fn detect_cleaning(series: &OverlapSeries, cfg: &EventConfig) -> Vec<EventRecord> {
    detect_upto(series, cfg, series.records.len(), EventKind::Cleaning)
}

fn detect_upto(series: &OverlapSeries, cfg: &EventConfig, end: usize, kind: EventKind) -> Vec<EventRecord> {
    let test = match kind {
        EventKind::Littering => littering_at,
        EventKind::Cleaning => cleaning_at,
    };
    (0..end)
        .filter_map(|i| test(&series.records, i, cfg).map(|c| event(series, i, kind, c)))
        .collect()
}

/// Contact integral a person accumulates with the litter relevant to `event`:
/// before the event for littering, over the following window for cleaning.
fn contact_integral(series: &OverlapSeries, event: &EventRecord, cfg: &EventConfig) -> f64 {
    let w = cfg.separation_window as i64;
    series
        .records
        .iter()
        .filter(|r| match event.kind {
            EventKind::Littering => r.frame < event.frame,
            EventKind::Cleaning => r.frame >= event.frame && r.frame <= event.frame + w,
        })
        .map(|r| r.intersection_area)
        .sum()
}

/// Assigns the offender: the person with the largest contact integral around
/// the event, then their gallery identity when a gallery is supplied.
pub fn attribute_offender(
    event: &EventRecord,
    litter: &TrackHistory,
    persons: &[TrackHistory],
    cfg: &EventConfig,
    gallery: Option<(&IdentityGallery, &MatchConfig)>,
) -> Result<EventRecord> {
    let mut best: Option<(f64, &TrackHistory)> = None;
    for person in persons {
        let Some(series) = overlap_series(person, litter, cfg.person_margin)? else { continue };
        let integral = contact_integral(&series, event, cfg);
        if integral > 0.0 && best.is_none_or(|(b, _)| integral > b) {
            best = Some((integral, person));
        }
    }
    let mut out = event.clone();
    out.person_track = best.map(|(_, p)| p.id);
    out.identity = None;
    out.identity_ambiguous = false;
    if let (Some((_, person)), Some((gallery, mcfg))) = (best, gallery) {
        if let Some(appearance) = &person.appearance {
            let m = gallery.match_identity(appearance, mcfg)?;
            out.identity = m.label;
            out.identity_ambiguous = m.ambiguous;
        }
    }
    Ok(out)
}

struct Candidate {
    event: EventRecord,
    integral: f64,
}

/// Earliest candidate per kind for one litter track, plus the series used.
/// With `lookahead` set, only records followed by that many more are tested,
/// so the outcome cannot change as records are appended.
fn litter_candidates(
    litter: &TrackHistory,
    persons: &[TrackHistory],
    cfg: &EventConfig,
    lookahead: Option<usize>,
) -> Result<(Vec<OverlapSeries>, BTreeMap<EventKind, EventRecord>)> {
    let mut all_series = Vec::new();
    let mut best: BTreeMap<EventKind, Candidate> = BTreeMap::new();
    for person in persons {
        let Some(series) = overlap_series(person, litter, cfg.person_margin)? else { continue };
        let n = series.records.len();
        let end = lookahead.map_or(n, |l| (n + 1).saturating_sub(l));
        let found = [EventKind::Littering, EventKind::Cleaning]
            .into_iter()
            .filter_map(|k| detect_upto(&series, cfg, end, k).into_iter().next());
        for ev in found {
            let integral = contact_integral(&series, &ev, cfg);
            let replace = match best.get(&ev.kind) {
                None => true,
                Some(cur) => {
                    (ev.frame, -integral, ev.person_track)
                        .partial_cmp(&(cur.event.frame, -cur.integral, cur.event.person_track))
                        == Some(std::cmp::Ordering::Less)
                }
            };
            if replace {
                best.insert(ev.kind, Candidate { event: ev, integral });
            }
        }
        all_series.push(series);
    }
    Ok((all_series, best.into_iter().map(|(k, c)| (k, c.event)).collect()))
}

fn split_tracks<'a>(
    tracks: &'a [TrackHistory],
    litter_classes: &BTreeSet<String>,
) -> (Vec<TrackHistory>, Vec<&'a TrackHistory>) {
    let persons = tracks
        .iter()
        .filter(|t| t.class_label == PERSON_CLASS)
        .cloned()
        .collect();
    let litters = tracks
        .iter()
        .filter(|t| litter_classes.contains(&t.class_label))
        .collect();
    (persons, litters)
}

/// Batch detection over finished tracks: at most one event of each kind per
/// litter track, attributed to its offender.
pub fn detect_events(
    tracks: &[TrackHistory],
    litter_classes: &BTreeSet<String>,
    cfg: &EventConfig,
    gallery: Option<(&IdentityGallery, &MatchConfig)>,
) -> Result<Vec<EventRecord>> {
    cfg.validate()?;
    let (persons, litters) = split_tracks(tracks, litter_classes);
    let mut out = Vec::new();
    for litter in litters {
        let (_, found) = litter_candidates(litter, &persons, cfg, None)?;
        for ev in found.into_values() {
            out.push(attribute_offender(&ev, litter, &persons, cfg, gallery)?);
        }
    }
    sort_events(&mut out);
    Ok(out)
}

pub fn sort_events(events: &mut [EventRecord]) {
    events.sort_by_key(|e| (e.frame, e.litter_track, e.kind));
}

/// One track's box on one frame, as fed to [`StreamingEventDetector`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBox {
    pub track_id: u64,
    pub class_label: String,
    pub entry: HistoryEntry,
}

/// Incremental detector fed one frame of track boxes at a time. Emits each
/// event as soon as no later data can change it, so the union of emitted
/// events equals [`detect_events`] over the full stream.
#[derive(Debug, Clone)]
pub struct StreamingEventDetector {
    cfg: EventConfig,
    litter_classes: BTreeSet<String>,
    tracks: BTreeMap<u64, TrackHistory>,
    emitted: BTreeSet<(u64, EventKind)>,
    last_frame: Option<i64>,
}

impl StreamingEventDetector {
    pub fn new(cfg: EventConfig, litter_classes: BTreeSet<String>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            litter_classes,
            tracks: BTreeMap::new(),
            emitted: BTreeSet::new(),
            last_frame: None,
        })
    }

    /// Adds one frame of track boxes and returns newly final events.
    pub fn push_frame(&mut self, frame: i64, boxes: impl IntoIterator<Item = FrameBox>) -> Result<Vec<EventRecord>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Sequencing { last, got: frame });
            }
        }
        self.last_frame = Some(frame);
        for b in boxes {
            self.tracks
                .entry(b.track_id)
                .or_insert_with(|| TrackHistory {
                    id: b.track_id,
                    class_label: b.class_label.clone(),
                    appearance: None,
                    entries: BTreeMap::new(),
                })
                .entries
                .insert(frame, b.entry);
        }
        self.collect(false)
    }

    /// Flushes every remaining event once the stream has ended.
    pub fn finish(&mut self) -> Result<Vec<EventRecord>> {
        self.collect(true)
    }

    fn collect(&mut self, at_end: bool) -> Result<Vec<EventRecord>> {
        let snapshot: Vec<TrackHistory> = self.tracks.values().cloned().collect();
        let (persons, litters) = split_tracks(&snapshot, &self.litter_classes);
        let lookahead = self.cfg.lookahead();
        let mut out = Vec::new();
        for litter in litters {
            let limit = (!at_end).then_some(lookahead);
            let (series, found) = litter_candidates(litter, &persons, &self.cfg, limit)?;
            for (kind, ev) in found {
                if self.emitted.contains(&(litter.id, kind)) {
                    continue;
                }
                // an earlier candidate could still appear at any undecided record
                let settled = at_end
                    || series.iter().all(|s| {
                        let first_open = (s.records.len() + 1).saturating_sub(lookahead);
                        s.records.get(first_open).is_none_or(|r| r.frame > ev.frame)
                    });
                if !settled {
                    continue;
                }
                self.emitted.insert((litter.id, kind));
                out.push(attribute_offender(&ev, litter, &persons, &self.cfg, None)?);
            }
        }
        sort_events(&mut out);
        Ok(out)
    }
}
