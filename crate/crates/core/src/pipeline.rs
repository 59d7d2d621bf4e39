//! End-to-end orchestration: track → (link, interpolate) → events → identity.

use std::collections::BTreeMap;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::events::{attribute_offender, detect_events, EventRecord, FrameBox, StreamingEventDetector, PERSON_CLASS};
use crate::identity::IdentityGallery;
use crate::postprocess::{gsi_interpolate, link_tracklets};
use crate::tracker::{Detection, TrackHistory, Tracker};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub tracks: Vec<TrackHistory>,
    pub events: Vec<EventRecord>,
}

/// Runs the tracker over every frame from the first to the last key of
/// `detections`, including frames with no detections.
pub fn track_detections(cfg: &PipelineConfig, detections: &BTreeMap<i64, Vec<Detection>>) -> Result<Vec<TrackHistory>> {
    let mut tracker = Tracker::new(cfg.tracker)?;
    let (Some(first), Some(last)) = (detections.keys().next(), detections.keys().next_back()) else {
        return Ok(Vec::new());
    };
    for frame in *first..=*last {
        let dets = detections.get(&frame).map_or(&[][..], Vec::as_slice);
        tracker.step(frame, dets)?;
    }
    Ok(tracker.export_tracks())
}

/// Offline refinement for modes that enable it: link, then fill gaps.
pub fn postprocess(cfg: &PipelineConfig, tracks: Vec<TrackHistory>) -> Result<Vec<TrackHistory>> {
    if !cfg.mode.postprocess() {
        return Ok(tracks);
    }
    let linked = link_tracklets(tracks, &cfg.aflink).map_err(|e| e.in_stage("aflink"))?;
    linked
        .iter()
        .map(|t| gsi_interpolate(t, &cfg.gsi))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("gsi"))
}

/// Events with offender identity from `gallery` when given.
pub fn find_events(
    cfg: &PipelineConfig,
    tracks: &[TrackHistory],
    gallery: Option<&IdentityGallery>,
) -> Result<Vec<EventRecord>> {
    detect_events(tracks, &cfg.litter_classes, &cfg.events, gallery.map(|g| (g, &cfg.identity)))
}

/// Full batch pipeline. `cfg` should already be [`PipelineConfig::effective`].
pub fn run(
    cfg: &PipelineConfig,
    detections: &BTreeMap<i64, Vec<Detection>>,
    gallery: Option<&IdentityGallery>,
) -> Result<PipelineOutput> {
    let raw = track_detections(cfg, detections).map_err(|e| e.in_stage("track"))?;
    let tracks = postprocess(cfg, raw)?;
    let events = find_events(cfg, &tracks, gallery).map_err(|e| e.in_stage("events"))?;
    Ok(PipelineOutput { tracks, events })
}

/// Replays finished tracks frame by frame through the streaming detector.
/// The result equals [`find_events`] on the same tracks.
pub fn stream_events(
    cfg: &PipelineConfig,
    tracks: &[TrackHistory],
    gallery: Option<&IdentityGallery>,
) -> Result<Vec<EventRecord>> {
    let mut detector = StreamingEventDetector::new(cfg.events, cfg.litter_classes.clone())?;
    let mut by_frame: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, t) in tracks.iter().enumerate() {
        for f in t.entries.keys() {
            by_frame.entry(*f).or_default().push(i);
        }
    }
    let mut events = Vec::new();
    for (frame, idx) in by_frame {
        let boxes = idx.into_iter().map(|i| {
            let t = &tracks[i];
            FrameBox {
                track_id: t.id,
                class_label: t.class_label.clone(),
                entry: t.entries[&frame],
            }
        });
        events.extend(detector.push_frame(frame, boxes)?);
    }
    events.extend(detector.finish()?);
    if let Some(g) = gallery {
        let persons: Vec<TrackHistory> = tracks.iter().filter(|t| t.class_label == PERSON_CLASS).cloned().collect();
        events = events
            .iter()
            .map(|e| {
                let litter = tracks.iter().find(|t| t.id == e.litter_track).expect("event litter track exists");
                attribute_offender(e, litter, &persons, &cfg.events, Some((g, &cfg.identity)))
            })
            .collect::<Result<_>>()?;
    }
    crate::events::sort_events(&mut events);
    Ok(events)
}
