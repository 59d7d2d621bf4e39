use std::collections::BTreeMap;

use super::{check_threshold, max_score_matching, LabeledFrameSet};
use crate::error::Result;
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdMetrics {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Global id mapping maximizing the number of frames where a gt id and its
/// mapped pred id overlap at or above the threshold.
pub fn evaluate_idf1(data: &LabeledFrameSet, iou_threshold: f64) -> Result<IdMetrics> {
    check_threshold(iou_threshold)?;
    data.validate()?;
    data.require_gt()?;
    let mut gt_ids = BTreeMap::new();
    let mut pred_ids = BTreeMap::new();
    let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for frame in data.frames() {
        let (gt, pred) = data.at(frame);
        for (gid, g) in gt {
            let n = gt_ids.len();
            gt_ids.entry(*gid).or_insert(n);
            for (pid, p) in pred {
                if iou(g, p) >= iou_threshold {
                    *counts.entry((*gid, *pid)).or_default() += 1;
                }
            }
        }
        for (pid, _) in pred {
            let n = pred_ids.len();
            pred_ids.entry(*pid).or_insert(n);
        }
    }
    let mut scores = vec![vec![0.0; pred_ids.len()]; gt_ids.len()];
    for ((g, p), c) in &counts {
        scores[gt_ids[g]][pred_ids[p]] = *c as f64;
    }
    let idtp: usize = max_score_matching(&scores, pred_ids.len())
        .iter()
        .map(|&(r, c)| scores[r][c] as usize)
        .sum();
    let idfn = data.gt_count() - idtp;
    let idfp = data.pred_count() - idtp;
    Ok(IdMetrics {
        idf1: 2.0 * idtp as f64 / (2 * idtp + idfp + idfn) as f64,
        idtp,
        idfp,
        idfn,
    })
}
