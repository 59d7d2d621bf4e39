use std::collections::BTreeMap;

use super::{check_threshold, iou_matrix, max_score_matching, LabeledFrameSet};
use crate::error::Result;

/// Bonus making a continued correspondence outrank any fresh one.
const CONTINUITY_BONUS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMetrics {
    pub mota: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub gt_count: usize,
}

pub fn evaluate_clear(data: &LabeledFrameSet, iou_threshold: f64) -> Result<ClearMetrics> {
    check_threshold(iou_threshold)?;
    data.validate()?;
    data.require_gt()?;
    let (mut tp, mut fp, mut fn_, mut idsw) = (0, 0, 0, 0);
    // pred id matched to each gt id on the previous frame, and the last ever
    let mut prev: BTreeMap<u64, u64> = BTreeMap::new();
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    for frame in data.frames() {
        let (gt, pred) = data.at(frame);
        let ious = iou_matrix(gt, pred);
        let scores: Vec<Vec<f64>> = gt
            .iter()
            .zip(&ious)
            .map(|((gid, _), row)| {
                pred.iter()
                    .zip(row)
                    .map(|((pid, _), &v)| {
                        if v < iou_threshold {
                            0.0
                        } else if prev.get(gid) == Some(pid) {
                            CONTINUITY_BONUS + v
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let matches = max_score_matching(&scores, pred.len());
        let mut current = BTreeMap::new();
        for &(r, c) in &matches {
            let (gid, pid) = (gt[r].0, pred[c].0);
            if last.get(&gid).is_some_and(|p| *p != pid) {
                idsw += 1;
            }
            last.insert(gid, pid);
            current.insert(gid, pid);
        }
        prev = current;
        tp += matches.len();
        fp += pred.len() - matches.len();
        fn_ += gt.len() - matches.len();
    }
    let gt_count = data.gt_count();
    Ok(ClearMetrics {
        mota: 1.0 - (fn_ + fp + idsw) as f64 / gt_count as f64,
        tp,
        fp,
        fn_,
        idsw,
        gt_count,
    })
}
