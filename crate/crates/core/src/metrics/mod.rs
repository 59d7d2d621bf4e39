//! MOT evaluation: CLEAR (MOTA), ID measures (IDF1) and HOTA.
//!
//! Definitions follow the community-standard formulations: CLEAR matching
//! keeps last frame's correspondences when they still clear the IoU
//! threshold, IDF1 uses a global bipartite id mapping, and HOTA averages
//! over localization thresholds α = 0.05, 0.10, …, 0.95.

mod clear;
mod events;
mod hota;
mod idf1;
mod report;

use std::collections::{BTreeMap, BTreeSet};

pub use clear::{evaluate_clear, ClearMetrics};
pub use events::{score_events, EventScore};
pub use hota::{evaluate_hota, HotaMetrics, HOTA_ALPHAS};
pub use idf1::{evaluate_idf1, IdMetrics};
pub use report::MetricReport;

use crate::assignment::{hungarian, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::tracker::TrackHistory;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Ground-truth and predicted boxes per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledFrameSet {
    pub gt: BTreeMap<i64, Vec<(u64, BoundingBox)>>,
    pub pred: BTreeMap<i64, Vec<(u64, BoundingBox)>>,
}

impl LabeledFrameSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_gt(&mut self, frame: i64, id: u64, bbox: BoundingBox) {
        self.gt.entry(frame).or_default().push((id, bbox));
    }

    pub fn add_pred(&mut self, frame: i64, id: u64, bbox: BoundingBox) {
        self.pred.entry(frame).or_default().push((id, bbox));
    }

    /// Builds the set from track histories, keeping tracks whose class passes
    /// `keep`.
    pub fn from_tracks(
        gt: &[TrackHistory],
        pred: &[TrackHistory],
        keep: impl Fn(&str) -> bool,
    ) -> Self {
        let mut out = Self::new();
        for t in gt.iter().filter(|t| keep(&t.class_label)) {
            for (f, e) in &t.entries {
                out.add_gt(*f, t.id, e.bbox);
            }
        }
        for t in pred.iter().filter(|t| keep(&t.class_label)) {
            for (f, e) in &t.entries {
                out.add_pred(*f, t.id, e.bbox);
            }
        }
        out
    }

    pub fn gt_count(&self) -> usize {
        self.gt.values().map(Vec::len).sum()
    }

    pub fn pred_count(&self) -> usize {
        self.pred.values().map(Vec::len).sum()
    }

    pub(crate) fn frames(&self) -> BTreeSet<i64> {
        self.gt.keys().chain(self.pred.keys()).copied().collect()
    }

    pub(crate) fn at(&self, frame: i64) -> (&[(u64, BoundingBox)], &[(u64, BoundingBox)]) {
        const EMPTY: &[(u64, BoundingBox)] = &[];
        (
            self.gt.get(&frame).map_or(EMPTY, Vec::as_slice),
            self.pred.get(&frame).map_or(EMPTY, Vec::as_slice),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (side, map) in [("ground truth", &self.gt), ("prediction", &self.pred)] {
            for (frame, items) in map {
                let mut seen = BTreeSet::new();
                for (id, _) in items {
                    if *id == 0 {
                        return Err(Error::InvalidInput(format!("{side} id 0 at frame {frame}; ids must be positive")));
                    }
                    if !seen.insert(*id) {
                        return Err(Error::InvalidInput(format!("{side} id {id} repeated at frame {frame}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn require_gt(&self) -> Result<()> {
        if self.gt_count() == 0 {
            return Err(Error::UndefinedMetric("ground truth is empty".into()));
        }
        Ok(())
    }
}

pub(crate) fn iou_matrix(gt: &[(u64, BoundingBox)], pred: &[(u64, BoundingBox)]) -> Vec<Vec<f64>> {
    gt.iter()
        .map(|(_, g)| pred.iter().map(|(_, p)| iou(g, p)).collect())
        .collect()
}

/// Maximum-total-score matching; pairs scoring zero or less are dropped
/// afterwards. This maximizes the summed score, not the number of pairs.
pub(crate) fn max_score_matching(scores: &[Vec<f64>], cols: usize) -> Vec<(usize, usize)> {
    let rows = scores.len();
    let costs: Vec<f64> = scores.iter().flat_map(|r| r.iter().map(|s| -s.max(0.0))).collect();
    hungarian(&CostMatrix::new(rows, cols, costs))
        .matches
        .into_iter()
        .filter(|&(r, c)| scores[r][c] > 0.0)
        .collect()
}

/// Runs all three metric families at `iou_threshold` (CLEAR and IDF1; HOTA
/// sweeps its own thresholds).
pub fn evaluate(data: &LabeledFrameSet, iou_threshold: f64) -> Result<MetricReport> {
    let clear = evaluate_clear(data, iou_threshold)?;
    let id = evaluate_idf1(data, iou_threshold)?;
    let hota = evaluate_hota(data)?;
    Ok(MetricReport::new(clear, id, hota))
}

pub(crate) fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("iou threshold {t} must lie in (0, 1)")));
    }
    Ok(())
}
