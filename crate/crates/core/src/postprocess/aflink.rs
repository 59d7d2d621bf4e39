//! Appearance-free linking of temporally disjoint tracklets.
//!
//! A candidate pair `(earlier, later)` is scored by extrapolating the earlier
//! tracklet's terminal constant-velocity estimate to the later tracklet's
//! first frame and comparing centers, normalized by the terminal box height.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tracker::TrackHistory;

/// Observed frames used to estimate the terminal velocity.
const TERMINAL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AflinkConfig {
    pub max_frame_gap: u32,
    /// Allowed center error in units of the terminal box height.
    pub max_prediction_error: f64,
    pub min_tracklet_length: u32,
    pub score_threshold: f64,
}

impl Default for AflinkConfig {
    fn default() -> Self {
        Self {
            max_frame_gap: 45,
            max_prediction_error: 0.6,
            min_tracklet_length: 3,
            score_threshold: 0.5,
        }
    }
}

impl AflinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_frame_gap < 1 {
            return Err(Error::Config("aflink.max_frame_gap must be >= 1".into()));
        }
        if !(self.max_prediction_error > 0.0) {
            return Err(Error::Config("aflink.max_prediction_error must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config("aflink.score_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

/// Link score in `[0, 1]`, or `None` when the pair is ineligible.
pub fn aflink_score(earlier: &TrackHistory, later: &TrackHistory, cfg: &AflinkConfig) -> Option<f64> {
    if earlier.class_label != later.class_label {
        return None;
    }
    let min_len = cfg.min_tracklet_length as usize;
    if earlier.observed_count() < min_len.max(1) || later.observed_count() < min_len.max(1) {
        return None;
    }
    let (end, start) = (earlier.last_frame()?, later.first_frame()?);
    if start <= end || start - end > cfg.max_frame_gap as i64 {
        return None;
    }

    let tail: Vec<(i64, (f64, f64), f64)> = earlier
        .observed()
        .rev()
        .take(TERMINAL_WINDOW)
        .map(|(f, b)| (f, b.center(), b.height))
        .collect();
    let (last_frame, (lx, ly), last_h): (i64, (f64, f64), f64) = tail[0];
    let vx = slope(&tail.iter().map(|(f, c, _)| (*f as f64, c.0)).collect::<Vec<_>>());
    let vy = slope(&tail.iter().map(|(f, c, _)| (*f as f64, c.1)).collect::<Vec<_>>());

    let (first_frame, first_box) = later.observed().next()?;
    let dt = (first_frame - last_frame) as f64;
    let (px, py) = (lx + vx * dt, ly + vy * dt);
    let (qx, qy) = first_box.center();
    let err = (px - qx).hypot(py - qy);
    Some((1.0 - err / (cfg.max_prediction_error * last_h)).clamp(0.0_f64, 1.0))
}

/// Greedily merges the best-scoring eligible pairs. Each tracklet gains at most
/// one successor and one predecessor; chains collapse onto the id of their
/// earliest member.
pub fn link_tracklets(tracks: Vec<TrackHistory>, cfg: &AflinkConfig) -> Result<Vec<TrackHistory>> {
    cfg.validate()?;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in tracks.iter().enumerate() {
        for (j, b) in tracks.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(score) = aflink_score(a, b, cfg) {
                if score >= cfg.score_threshold && score > 0.0 {
                    candidates.push((score, i, j));
                }
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| tracks[x.1].id.cmp(&tracks[y.1].id))
            .then_with(|| tracks[x.2].id.cmp(&tracks[y.2].id))
    });

    let mut next: Vec<Option<usize>> = vec![None; tracks.len()];
    let mut prev: Vec<Option<usize>> = vec![None; tracks.len()];
    for (_, i, j) in candidates {
        if next[i].is_none() && prev[j].is_none() {
            next[i] = Some(j);
            prev[j] = Some(i);
            log::debug!("aflink: {} -> {}", tracks[i].id, tracks[j].id);
        }
    }

    let mut slots: Vec<Option<TrackHistory>> = tracks.into_iter().map(Some).collect();
    let mut merged: BTreeMap<u64, TrackHistory> = BTreeMap::new();
    for root in 0..slots.len() {
        if prev[root].is_some() {
            continue;
        }
        let Some(mut head) = slots[root].take() else { continue };
        let mut cur = next[root];
        while let Some(k) = cur {
            let seg = slots[k].take().expect("chain visits each tracklet once");
            head.entries.extend(seg.entries);
            if seg.appearance.is_some() {
                head.appearance = seg.appearance;
            }
            cur = next[k];
        }
        merged.insert(head.id, head);
    }
    Ok(merged.into_values().collect())
}
