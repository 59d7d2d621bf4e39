use std::collections::BTreeMap;

use super::{iou_matrix, max_score_matching, LabeledFrameSet};
use crate::error::Result;

/// Localization thresholds 0.05, 0.10, …, 0.95.
pub const HOTA_ALPHAS: [f64; 19] = {
    let mut a = [0.0; 19];
    let mut i = 0;
    while i < 19 {
        a[i] = (i as f64 + 1.0) * 0.05;
        i += 1;
    }
    a
};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HotaMetrics {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub hota_alpha: Vec<f64>,
    pub deta_alpha: Vec<f64>,
    pub assa_alpha: Vec<f64>,
}

fn index_of(ids: &mut BTreeMap<u64, usize>, id: u64) -> usize {
    let n = ids.len();
    *ids.entry(id).or_insert(n)
}

pub fn evaluate_hota(data: &LabeledFrameSet) -> Result<HotaMetrics> {
    data.validate()?;
    data.require_gt()?;
    let frames = data.frames();
    let mut gt_ids = BTreeMap::new();
    let mut pred_ids = BTreeMap::new();
    for &f in &frames {
        let (gt, pred) = data.at(f);
        gt.iter().for_each(|(id, _)| {
            index_of(&mut gt_ids, *id);
        });
        pred.iter().for_each(|(id, _)| {
            index_of(&mut pred_ids, *id);
        });
    }
    let (ng, np) = (gt_ids.len(), pred_ids.len());

    // global alignment between every gt id and pred id
    let mut potential = vec![vec![0.0; np]; ng];
    let mut gt_count = vec![0.0; ng];
    let mut pred_count = vec![0.0; np];
    for &f in &frames {
        let (gt, pred) = data.at(f);
        let sim = iou_matrix(gt, pred);
        let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..pred.len()).map(|c| sim.iter().map(|r| r[c]).sum()).collect();
        for (r, (gid, _)) in gt.iter().enumerate() {
            for (c, (pid, _)) in pred.iter().enumerate() {
                let denom = row_sum[r] + col_sum[c] - sim[r][c];
                if denom > EPS {
                    potential[gt_ids[gid]][pred_ids[pid]] += sim[r][c] / denom;
                }
            }
            gt_count[gt_ids[gid]] += 1.0;
        }
        for (pid, _) in pred {
            pred_count[pred_ids[pid]] += 1.0;
        }
    }
    let alignment: Vec<Vec<f64>> = (0..ng)
        .map(|g| {
            (0..np)
                .map(|p| potential[g][p] / (gt_count[g] + pred_count[p] - potential[g][p]))
                .collect()
        })
        .collect();

    let na = HOTA_ALPHAS.len();
    let mut tp = vec![0usize; na];
    let mut fn_ = vec![0usize; na];
    let mut fp = vec![0usize; na];
    let mut matches = vec![vec![vec![0.0; np]; ng]; na];
    for &f in &frames {
        let (gt, pred) = data.at(f);
        let sim = iou_matrix(gt, pred);
        let scores: Vec<Vec<f64>> = gt
            .iter()
            .zip(&sim)
            .map(|((gid, _), row)| {
                pred.iter()
                    .zip(row)
                    .map(|((pid, _), s)| alignment[gt_ids[gid]][pred_ids[pid]] * s)
                    .collect()
            })
            .collect();
        let pairs = max_score_matching(&scores, pred.len());
        for (a, &alpha) in HOTA_ALPHAS.iter().enumerate() {
            let mut n = 0;
            for &(r, c) in &pairs {
                if sim[r][c] >= alpha - EPS {
                    n += 1;
                    matches[a][gt_ids[&gt[r].0]][pred_ids[&pred[c].0]] += 1.0;
                }
            }
            tp[a] += n;
            fn_[a] += gt.len() - n;
            fp[a] += pred.len() - n;
        }
    }

    let mut deta_alpha = Vec::with_capacity(na);
    let mut assa_alpha = Vec::with_capacity(na);
    let mut hota_alpha = Vec::with_capacity(na);
    for a in 0..na {
        let deta = tp[a] as f64 / ((tp[a] + fn_[a] + fp[a]).max(1)) as f64;
        let mut weighted = 0.0;
        for g in 0..ng {
            for p in 0..np {
                let m = matches[a][g][p];
                if m > 0.0 {
                    weighted += m * m / (gt_count[g] + pred_count[p] - m);
                }
            }
        }
        let assa = weighted / (tp[a].max(1)) as f64;
        deta_alpha.push(deta);
        assa_alpha.push(assa);
        hota_alpha.push((deta * assa).sqrt());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(HotaMetrics {
        hota: mean(&hota_alpha),
        deta: mean(&deta_alpha),
        assa: mean(&assa_alpha),
        hota_alpha,
        deta_alpha,
        assa_alpha,
    })
}
