//! Frame-by-frame tracklet lifecycle: predict, associate, update, spawn and
//! retire.

use std::collections::BTreeMap;

use nalgebra::SVector;

use crate::assignment::hungarian;
use crate::association::{build_cost_matrix, AssociationConfig, DetectionView, TrackView};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::motion::{self, ConstantVelocity, MotionState, Projection, UkfParams, MEAS_DIM, STATE_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub class_label: String,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn new(frame: i64, bbox: BoundingBox, confidence: f64, class_label: impl Into<String>) -> Self {
        Self {
            frame,
            bbox,
            confidence,
            class_label: class_label.into(),
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub bbox: BoundingBox,
    pub interpolated: bool,
}

impl HistoryEntry {
    pub fn observed(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            interpolated: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    id: u64,
    pub state: MotionState,
    pub status: TrackStatus,
    pub hits: u32,
    pub age: u32,
    pub time_since_update: u32,
    pub appearance: Option<Embedding>,
    pub class_label: String,
    pub history: BTreeMap<i64, HistoryEntry>,
    was_confirmed: bool,
}

impl Tracklet {
    pub fn id(&self) -> u64 {
        self.id
    }

    fn mark_missed(&mut self, max_age: u32) {
        match self.status {
            TrackStatus::Tentative => self.status = TrackStatus::Deleted,
            TrackStatus::Confirmed if self.time_since_update > max_age => {
                self.status = TrackStatus::Deleted
            }
            _ => {}
        }
    }

    fn confirm_if_ready(&mut self, n_init: u32) {
        if self.status == TrackStatus::Tentative && self.hits >= n_init {
            self.status = TrackStatus::Confirmed;
            self.was_confirmed = true;
        }
    }

    pub fn to_history(&self) -> TrackHistory {
        TrackHistory {
            id: self.id,
            class_label: self.class_label.clone(),
            appearance: self.appearance.clone(),
            entries: self.history.clone(),
        }
    }
}

/// Exported track: id, class and per-frame boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackHistory {
    pub id: u64,
    pub class_label: String,
    pub appearance: Option<Embedding>,
    pub entries: BTreeMap<i64, HistoryEntry>,
}

impl TrackHistory {
    pub fn first_frame(&self) -> Option<i64> {
        self.entries.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.entries.keys().next_back().copied()
    }

    pub fn observed(&self) -> impl DoubleEndedIterator<Item = (i64, &BoundingBox)> {
        self.entries
            .iter()
            .filter(|(_, e)| !e.interpolated)
            .map(|(f, e)| (*f, &e.bbox))
    }

    pub fn observed_count(&self) -> usize {
        self.entries.values().filter(|e| !e.interpolated).count()
    }

    pub fn bbox_at(&self, frame: i64) -> Option<&BoundingBox> {
        self.entries.get(&frame).map(|e| &e.bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub n_init: u32,
    pub max_age: u32,
    /// Weight of the old appearance in the moving average.
    pub ema_alpha: f64,
    pub association: AssociationConfig,
    pub ukf: UkfParams,
    pub min_confidence: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_init: 3,
            max_age: 30,
            ema_alpha: 0.9,
            association: AssociationConfig::default(),
            ukf: UkfParams::default(),
            min_confidence: 0.3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 1 || self.max_age < 1 {
            return Err(Error::Config("tracker.n_init and tracker.max_age must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::Config("tracker.ema_alpha must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Config("tracker.min_confidence must lie in [0, 1]".into()));
        }
        self.association.validate()?;
        self.ukf.validate(STATE_DIM)
    }
}

/// A confirmed track reported for the current frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub frame: i64,
    pub bbox: BoundingBox,
    pub class_label: String,
}

/// `normalize(α·old + (1 − α)·e)`, keeping `old` if the blend vanishes.
pub fn update_appearance(old: &Embedding, e: &Embedding, ema_alpha: f64) -> Result<Embedding> {
    if old.dim() != e.dim() {
        return Err(Error::InvalidInput(format!(
            "appearance dimension {} does not match detection embedding {}",
            old.dim(),
            e.dim()
        )));
    }
    let blended: Vec<f64> = old
        .as_slice()
        .iter()
        .zip(e.as_slice())
        .map(|(o, n)| ema_alpha * o + (1.0 - ema_alpha) * n)
        .collect();
    Ok(Embedding::new(blended).unwrap_or_else(|_| old.clone()))
}

/// Single-sequence tracker. Calls to [`Tracker::step`] must be serialized and
/// use strictly increasing frame indices.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    model: ConstantVelocity,
    tracks: Vec<Tracklet>,
    retired: Vec<Tracklet>,
    next_id: u64,
    last_frame: Option<i64>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            model: ConstantVelocity,
            tracks: Vec::new(),
            retired: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live (tentative or confirmed) tracklets.
    pub fn tracks(&self) -> &[Tracklet] {
        &self.tracks
    }

    pub fn step(&mut self, frame: i64, detections: &[Detection]) -> Result<Vec<TrackOutput>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Sequencing { last, got: frame });
            }
        }
        for d in detections {
            if d.frame != frame {
                return Err(Error::InvalidInput(format!(
                    "detection for frame {} passed with frame {frame}",
                    d.frame
                )));
            }
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::InvalidInput(format!(
                    "detection confidence {} outside [0, 1]",
                    d.confidence
                )));
            }
        }
        let dt = self.last_frame.map_or(1, |last| frame - last);
        self.last_frame = Some(frame);

        let ukf = self.cfg.ukf;
        for t in &mut self.tracks {
            t.state = motion::predict(&t.state, &self.model, &ukf, dt as f64)?;
            t.age += dt as u32;
            t.time_since_update += dt as u32;
        }

        let projections = self
            .tracks
            .iter()
            .map(|t| motion::project(&t.state, &self.model, &ukf))
            .collect::<Result<Vec<Projection<STATE_DIM, MEAS_DIM>>>>()?;

        let (matches, unmatched_dets) = self.associate(detections, &projections)?;

        let mut matched_track = vec![false; self.tracks.len()];
        for (det_idx, track_idx) in matches {
            let det = &detections[det_idx];
            let track = &mut self.tracks[track_idx];
            let z = SVector::<f64, MEAS_DIM>::from(det.bbox.to_measurement().to_array());
            track.state = motion::update_with(&track.state, &projections[track_idx], &z, &self.model)?;
            track.hits += 1;
            track.time_since_update = 0;
            if let Some(e) = &det.embedding {
                track.appearance = Some(match &track.appearance {
                    Some(old) => update_appearance(old, e, self.cfg.ema_alpha)?,
                    None => e.clone(),
                });
            }
            track.history.insert(frame, HistoryEntry::observed(det.bbox));
            track.confirm_if_ready(self.cfg.n_init);
            matched_track[track_idx] = true;
        }
        for (track, matched) in self.tracks.iter_mut().zip(&matched_track) {
            if !matched {
                track.mark_missed(self.cfg.max_age);
            }
        }

        for det_idx in unmatched_dets {
            let det = &detections[det_idx];
            if det.confidence < self.cfg.min_confidence {
                continue;
            }
            self.spawn(frame, det);
        }

        let (live, dead): (Vec<_>, Vec<_>) = std::mem::take(&mut self.tracks)
            .into_iter()
            .partition(|t| t.status != TrackStatus::Deleted);
        self.tracks = live;
        self.retired.extend(dead.into_iter().filter(|t| t.was_confirmed));

        Ok(self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.time_since_update == 0)
            .map(|t| TrackOutput {
                id: t.id,
                frame,
                bbox: t.history[&frame].bbox,
                class_label: t.class_label.clone(),
            })
            .collect())
    }

    /// Hungarian matching run independently per class label.
    fn associate(
        &self,
        detections: &[Detection],
        projections: &[Projection<STATE_DIM, MEAS_DIM>],
    ) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
        let mut by_class: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, d) in detections.iter().enumerate() {
            by_class.entry(d.class_label.as_str()).or_default().0.push(i);
        }
        for (j, t) in self.tracks.iter().enumerate() {
            by_class.entry(t.class_label.as_str()).or_default().1.push(j);
        }

        let mut matches = Vec::new();
        let mut unmatched = Vec::new();
        for (det_ids, track_ids) in by_class.values() {
            if det_ids.is_empty() {
                continue;
            }
            if track_ids.is_empty() {
                unmatched.extend(det_ids.iter().copied());
                continue;
            }
            let track_views: Vec<TrackView<'_>> = track_ids
                .iter()
                .map(|&j| TrackView {
                    projection: &projections[j],
                    appearance: self.tracks[j].appearance.as_ref(),
                })
                .collect();
            let det_views: Vec<DetectionView<'_>> = det_ids
                .iter()
                .map(|&i| DetectionView {
                    measurement: detections[i].bbox.to_measurement(),
                    embedding: detections[i].embedding.as_ref(),
                })
                .collect();
            let cost = build_cost_matrix(&track_views, &det_views, &self.cfg.association)?;
            let assignment = hungarian(&cost);
            matches.extend(
                assignment
                    .matches
                    .iter()
                    .map(|&(r, c)| (det_ids[r], track_ids[c])),
            );
            unmatched.extend(assignment.unmatched_rows.iter().map(|&r| det_ids[r]));
        }
        matches.sort_unstable();
        unmatched.sort_unstable();
        Ok((matches, unmatched))
    }

    fn spawn(&mut self, frame: i64, det: &Detection) {
        let id = self.next_id;
        self.next_id += 1;
        let state = self.model.initiate(&det.bbox.to_measurement(), &self.cfg.ukf);
        let mut history = BTreeMap::new();
        history.insert(frame, HistoryEntry::observed(det.bbox));
        let mut track = Tracklet {
            id,
            state,
            status: TrackStatus::Tentative,
            hits: 1,
            age: 1,
            time_since_update: 0,
            appearance: det.embedding.clone(),
            class_label: det.class_label.clone(),
            history,
            was_confirmed: false,
        };
        track.confirm_if_ready(self.cfg.n_init);
        self.tracks.push(track);
    }

    /// Every track that was ever confirmed, live or deleted, ordered by id.
    pub fn export_tracks(&self) -> Vec<TrackHistory> {
        let mut out: Vec<TrackHistory> = self
            .retired
            .iter()
            .chain(self.tracks.iter().filter(|t| t.was_confirmed))
            .map(Tracklet::to_history)
            .collect();
        out.sort_by_key(|t| t.id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: i64, l: f64, t: f64) -> Detection {
        Detection::new(frame, BoundingBox::new(l, t, 40.0, 100.0).unwrap(), 0.9, "person")
    }

    #[test]
    fn first_detection_spawns_id_one() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let out = tr.step(1, &[det(1, 10.0, 10.0)]).unwrap();
        assert!(out.is_empty());
        assert_eq!(tr.tracks().len(), 1);
        assert_eq!(tr.tracks()[0].id(), 1);
        assert_eq!(tr.tracks()[0].status, TrackStatus::Tentative);
    }

    #[test]
    fn empty_frame_ages_tracks() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 1..=3 {
            tr.step(f, &[det(f, 10.0, 10.0)]).unwrap();
        }
        assert_eq!(tr.tracks()[0].time_since_update, 0);
        let out = tr.step(4, &[]).unwrap();
        assert!(out.is_empty());
        assert_eq!(tr.tracks()[0].time_since_update, 1);
    }

    #[test]
    fn stationary_object_confirms_with_exact_boxes() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let mut last = Vec::new();
        for f in 1..=3 {
            last = tr.step(f, &[det(f, 10.0, 20.0)]).unwrap();
        }
        assert_eq!(last.len(), 1);
        assert_eq!(last[0].id, 1);
        let b = last[0].bbox;
        assert!((b.left - 10.0).abs() < 1e-6 && (b.top - 20.0).abs() < 1e-6);
        let m = tr.tracks()[0].state.measurement();
        assert!((m.cx - 30.0).abs() < 1e-6 && (m.cy - 70.0).abs() < 1e-6);
    }

    #[test]
    fn tentative_track_dies_on_first_miss() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        tr.step(1, &[det(1, 10.0, 10.0)]).unwrap();
        tr.step(2, &[]).unwrap();
        assert!(tr.tracks().is_empty());
        assert!(tr.export_tracks().is_empty());
    }

    #[test]
    fn confirmed_track_survives_until_max_age() {
        let cfg = TrackerConfig { max_age: 3, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        for f in 1..=3 {
            tr.step(f, &[det(f, 10.0, 10.0)]).unwrap();
        }
        for f in 4..=6 {
            tr.step(f, &[]).unwrap();
            assert_eq!(tr.tracks().len(), 1);
        }
        tr.step(7, &[]).unwrap();
        assert!(tr.tracks().is_empty());
        let exported = tr.export_tracks();
        assert_eq!(exported.len(), 1);
        assert_eq!(exported[0].entries.len(), 3);
    }

    #[test]
    fn non_monotonic_frames_rejected() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        tr.step(5, &[]).unwrap();
        assert!(matches!(tr.step(5, &[]), Err(Error::Sequencing { last: 5, got: 5 })));
    }

    #[test]
    fn low_confidence_does_not_spawn() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let mut d = det(1, 0.0, 0.0);
        d.confidence = 0.1;
        tr.step(1, &[d]).unwrap();
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn classes_do_not_share_tracks() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        tr.step(1, &[det(1, 0.0, 0.0)]).unwrap();
        let mut bottle = det(2, 0.0, 0.0);
        bottle.class_label = "bottle".into();
        tr.step(2, &[bottle]).unwrap();
        // the person track missed (tentative, deleted) and a bottle track spawned
        assert_eq!(tr.tracks().len(), 1);
        assert_eq!(tr.tracks()[0].class_label, "bottle");
        assert_eq!(tr.tracks()[0].id(), 2);
    }

    #[test]
    fn appearance_ema() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(update_appearance(&a, &a, 0.9).unwrap(), a);
        assert_eq!(update_appearance(&a, &b, 0.0).unwrap(), b);
        let mixed = update_appearance(&a, &b, 0.5).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mixed.as_slice()[0] - r).abs() < 1e-12);
        assert!((mixed.as_slice()[1] - r).abs() < 1e-12);
        let neg = Embedding::new(vec![-1.0, 0.0]).unwrap();
        assert_eq!(update_appearance(&a, &neg, 0.5).unwrap(), a);
    }
}
