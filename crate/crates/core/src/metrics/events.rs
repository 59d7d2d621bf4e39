use serde::Serialize;

use crate::events::{EventKind, EventRecord};
use crate::geometry::{iou, BoundingBox};
use crate::tracker::TrackHistory;

/// Minimum IoU between predicted and true litter boxes for two events to
/// refer to the same object.
const LITTER_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EventScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EventScore {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn add(&mut self, other: EventScore) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn box_near(track: &TrackHistory, frame: i64) -> Option<&BoundingBox> {
    let after = track.entries.range(frame..).next();
    let before = track.entries.range(..frame).next_back();
    match (before, after) {
        (Some(b), Some(a)) => Some(if a.0 - frame <= frame - b.0 { &a.1.bbox } else { &b.1.bbox }),
        (Some(b), None) => Some(&b.1.bbox),
        (None, Some(a)) => Some(&a.1.bbox),
        (None, None) => None,
    }
}

/// One-to-one matching of events of `kind`: same kind, frames within
/// `tolerance`, and litter boxes overlapping at the predicted frame. Closer
/// frames match first.
pub fn score_events(
    truth: &[EventRecord],
    truth_tracks: &[TrackHistory],
    predicted: &[EventRecord],
    predicted_tracks: &[TrackHistory],
    kind: EventKind,
    tolerance: i64,
) -> EventScore {
    let track = |tracks: &'_ [TrackHistory], id: u64| tracks.iter().find(|t| t.id == id).cloned();
    let truth: Vec<&EventRecord> = truth.iter().filter(|e| e.kind == kind).collect();
    let predicted: Vec<&EventRecord> = predicted.iter().filter(|e| e.kind == kind).collect();
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, p) in predicted.iter().enumerate() {
            let d = (t.frame - p.frame).abs();
            if d > tolerance {
                continue;
            }
            let same_object = match (track(truth_tracks, t.litter_track), track(predicted_tracks, p.litter_track)) {
                (Some(tt), Some(pt)) => match (box_near(&tt, p.frame), box_near(&pt, p.frame)) {
                    (Some(a), Some(b)) => iou(a, b) >= LITTER_IOU,
                    _ => false,
                },
                _ => false,
            };
            if same_object {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_t = vec![false; truth.len()];
    let mut used_p = vec![false; predicted.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_t[i] && !used_p[j] {
            used_t[i] = true;
            used_p[j] = true;
            tp += 1;
        }
    }
    EventScore {
        tp,
        fp: predicted.len() - tp,
        fn_: truth.len() - tp,
    }
}
