//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeMap, BTreeSet};

use littertrack::geometry::BoundingBox;
use littertrack::metrics::{LabeledFrameSet, HOTA_ALPHAS};
use nalgebra::{SMatrix, SVector};

// ------------------------------------------------------------ assignment

/// Exhaustive search over partial injective row → column maps. Maximizes the
/// number of feasible pairs, then minimizes the summed cost (rows in order).
pub fn brute_force_assignment(costs: &[Vec<f64>], feasible: &[Vec<bool>]) -> (usize, f64) {
    fn go(
        row: usize,
        costs: &[Vec<f64>],
        feasible: &[Vec<bool>],
        used: &mut Vec<bool>,
        count: usize,
        total: f64,
        best: &mut (usize, f64),
    ) {
        if row == costs.len() {
            if count > best.0 || (count == best.0 && total < best.1) {
                *best = (count, total);
            }
            return;
        }
        go(row + 1, costs, feasible, used, count, total, best);
        for c in 0..used.len() {
            if !used[c] && feasible[row][c] {
                used[c] = true;
                go(row + 1, costs, feasible, used, count + 1, total + costs[row][c], best);
                used[c] = false;
            }
        }
    }
    let cols = costs.first().map_or(0, Vec::len);
    let mut best = (0, f64::INFINITY);
    go(0, costs, feasible, &mut vec![false; cols], 0, 0.0, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    best
}

// ------------------------------------------------------------ Kalman filter

/// Textbook linear Kalman predict.
pub fn kf_predict<const N: usize>(
    x: &SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    (f * x, f * p * f.transpose() + q)
}

/// Textbook linear Kalman update.
pub fn kf_update<const N: usize, const M: usize>(
    x: &SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
    z: &SVector<f64, M>,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let s = h * p * h.transpose() + r;
    let k = p * h.transpose() * s.try_inverse().expect("innovation covariance invertible");
    let x1 = x + k * (z - h * x);
    let p1 = p - k * s * k.transpose();
    (x1, p1)
}

// ------------------------------------------------------------ GP regression

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Posterior mean with an RBF kernel; `linear` subtracts a least-squares
/// line fitted through the normal equations first.
pub fn gp_oracle(xs: &[f64], ys: &[f64], q: f64, ell: f64, noise: f64, linear: bool) -> f64 {
    let (c0, c1) = if linear && xs.len() > 1 {
        let n = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let sol = solve_dense(vec![vec![n, sx], vec![sx, sxx]], vec![sy, sxy]);
        (sol[0], sol[1])
    } else if linear {
        (ys[0], 0.0)
    } else {
        (0.0, 0.0)
    };
    let k = |a: f64, b: f64| (-(a - b).powi(2) / (2.0 * ell * ell)).exp();
    let gram: Vec<Vec<f64>> = xs
        .iter()
        .enumerate()
        .map(|(i, a)| xs.iter().enumerate().map(|(j, b)| k(*a, *b) + if i == j { noise } else { 0.0 }).collect())
        .collect();
    let resid: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - c0 - c1 * x).collect();
    let w = solve_dense(gram, resid);
    c0 + c1 * q + xs.iter().zip(&w).map(|(x, wi)| k(q, *x) * wi).sum::<f64>()
}

// ------------------------------------------------------------ metrics

fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.left + a.width).min(b.left + b.width) - a.left.max(b.left);
    let h = (a.top + a.height).min(b.top + b.height) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / (a.width * a.height + b.width * b.height - inter)
}

/// Exhaustive maximum-weight partial matching over pairs `score` admits.
fn best_partial_matching(n: usize, m: usize, score: &dyn Fn(usize, usize) -> Option<f64>) -> Vec<(usize, usize)> {
    fn go(
        r: usize,
        n: usize,
        m: usize,
        score: &dyn Fn(usize, usize) -> Option<f64>,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        acc: (usize, f64),
        best: &mut ((usize, f64), Vec<(usize, usize)>),
    ) {
        if r == n {
            if acc.1 > best.0 .1 + 1e-12 {
                *best = (acc, cur.clone());
            }
            return;
        }
        go(r + 1, n, m, score, used, cur, acc, best);
        for c in 0..m {
            if let (false, Some(s)) = (used[c], score(r, c)) {
                used[c] = true;
                cur.push((r, c));
                go(r + 1, n, m, score, used, cur, (acc.0 + 1, acc.1 + s), best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = ((0, 0.0), Vec::new());
    go(0, n, m, score, &mut vec![false; m], &mut Vec::new(), (0, 0.0), &mut best);
    best.1
}

/// CLEAR MOT from the definition: keep last frame's correspondences that
/// still reach the threshold, exhaustively match the rest for maximum IoU sum,
/// count a switch when a gt id is matched to a different id than last time.
pub fn reference_mota(data: &LabeledFrameSet, t: f64) -> (f64, usize) {
    let frames: BTreeSet<i64> = data.gt.keys().chain(data.pred.keys()).copied().collect();
    let empty = Vec::new();
    let mut prev: BTreeMap<u64, u64> = BTreeMap::new();
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let (mut fn_, mut fp, mut idsw, mut total) = (0usize, 0usize, 0usize, 0usize);
    for f in frames {
        let gt = data.gt.get(&f).unwrap_or(&empty);
        let pred = data.pred.get(&f).unwrap_or(&empty);
        total += gt.len();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut g_used = vec![false; gt.len()];
        let mut p_used = vec![false; pred.len()];
        for (gi, (gid, gb)) in gt.iter().enumerate() {
            if let Some(pid) = prev.get(gid) {
                if let Some(pi) = pred.iter().position(|(p, _)| p == pid) {
                    if iou(gb, &pred[pi].1) >= t {
                        pairs.push((gi, pi));
                        g_used[gi] = true;
                        p_used[pi] = true;
                    }
                }
            }
        }
        let g_rest: Vec<usize> = (0..gt.len()).filter(|i| !g_used[*i]).collect();
        let p_rest: Vec<usize> = (0..pred.len()).filter(|i| !p_used[*i]).collect();
        let extra = best_partial_matching(g_rest.len(), p_rest.len(), &|r, c| {
            let s = iou(&gt[g_rest[r]].1, &pred[p_rest[c]].1);
            (s >= t).then_some(s)
        });
        pairs.extend(extra.into_iter().map(|(r, c)| (g_rest[r], p_rest[c])));
        prev.clear();
        for &(gi, pi) in &pairs {
            let (gid, pid) = (gt[gi].0, pred[pi].0);
            if last.get(&gid).is_some_and(|l| *l != pid) {
                idsw += 1;
            }
            last.insert(gid, pid);
            prev.insert(gid, pid);
        }
        fn_ += gt.len() - pairs.len();
        fp += pred.len() - pairs.len();
    }
    (1.0 - (fn_ + fp + idsw) as f64 / total as f64, idsw)
}

/// IDF1 by exhaustive search over injective gt → pred id maps.
pub fn reference_idf1(data: &LabeledFrameSet, t: f64) -> f64 {
    let mut gt_n: BTreeMap<u64, usize> = BTreeMap::new();
    let mut pred_n: BTreeMap<u64, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (f, gts) in &data.gt {
        for (g, gb) in gts {
            *gt_n.entry(*g).or_default() += 1;
            for (p, pb) in data.pred.get(f).into_iter().flatten() {
                if iou(gb, pb) >= t {
                    *overlap.entry((*g, *p)).or_default() += 1;
                }
            }
        }
    }
    for preds in data.pred.values() {
        for (p, _) in preds {
            *pred_n.entry(*p).or_default() += 1;
        }
    }
    let gids: Vec<u64> = gt_n.keys().copied().collect();
    let pids: Vec<u64> = pred_n.keys().copied().collect();
    let pairs = best_partial_matching(gids.len(), pids.len(), &|r, c| {
        overlap.get(&(gids[r], pids[c])).map(|&v| v as f64)
    });
    let idtp: usize = pairs.iter().map(|&(r, c)| overlap[&(gids[r], pids[c])]).sum();
    let ng: usize = gt_n.values().sum();
    let np: usize = pred_n.values().sum();
    2.0 * idtp as f64 / (ng + np) as f64
}

/// HOTA, DetA, AssA from the definition for scenes where every gt box
/// overlaps at most one prediction per frame (so matching is forced).
pub fn reference_hota(data: &LabeledFrameSet) -> (f64, f64, f64) {
    let mut gt_n: BTreeMap<u64, f64> = BTreeMap::new();
    let mut pred_n: BTreeMap<u64, f64> = BTreeMap::new();
    for gts in data.gt.values() {
        for (g, _) in gts {
            *gt_n.entry(*g).or_default() += 1.0;
        }
    }
    for preds in data.pred.values() {
        for (p, _) in preds {
            *pred_n.entry(*p).or_default() += 1.0;
        }
    }
    let total_gt: f64 = gt_n.values().sum();
    let total_pred: f64 = pred_n.values().sum();
    let (mut h, mut d, mut a) = (0.0, 0.0, 0.0);
    for &alpha in &HOTA_ALPHAS {
        let mut tpa: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (f, gts) in &data.gt {
            for (g, gb) in gts {
                for (p, pb) in data.pred.get(f).into_iter().flatten() {
                    if iou(gb, pb) >= alpha - 1e-10 {
                        *tpa.entry((*g, *p)).or_default() += 1.0;
                    }
                }
            }
        }
        let tp: f64 = tpa.values().sum();
        let deta = tp / (total_gt + total_pred - tp);
        let assa = if tp > 0.0 {
            tpa.iter().map(|((g, p), m)| m * m / (gt_n[g] + pred_n[p] - m)).sum::<f64>() / tp
        } else {
            0.0
        };
        h += (deta * assa).sqrt();
        d += deta;
        a += assa;
    }
    let n = HOTA_ALPHAS.len() as f64;
    (h / n, d / n, a / n)
}

pub fn bx(left: f64, top: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new(left, top, w, h).unwrap()
}

/// Hand-built scenes: (name, data). Every scene keeps gt/pred overlaps
/// one-to-one so [`reference_hota`] applies.
pub fn micro_scenarios() -> Vec<(&'static str, LabeledFrameSet)> {
    let mut out = Vec::new();

    let mut d = LabeledFrameSet::new();
    for f in 1..=10 {
        d.add_gt(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        if f != 10 {
            d.add_pred(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        }
    }
    out.push(("single miss (MOTA 0.9)", d));

    let mut d = LabeledFrameSet::new();
    for f in 1..=10 {
        d.add_gt(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        d.add_pred(f, if f <= 5 { 1 } else { 2 }, bx(0.0, 0.0, 10.0, 10.0));
    }
    out.push(("split track (IDF1 0.5)", d));

    let mut d = LabeledFrameSet::new();
    for f in 1..=8 {
        d.add_gt(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        d.add_gt(f, 2, bx(100.0, 0.0, 10.0, 10.0));
        let (a, b) = if f <= 4 { (1, 2) } else { (2, 1) };
        d.add_pred(f, a, bx(0.0, 0.0, 10.0, 10.0));
        d.add_pred(f, b, bx(100.0, 0.0, 10.0, 10.0));
    }
    out.push(("identity swap", d));

    let mut d = LabeledFrameSet::new();
    for f in 1..=12 {
        d.add_gt(f, 1, bx(f as f64, 0.0, 20.0, 20.0));
        // drifting prediction: IoU falls as the offset grows
        d.add_pred(f, 7, bx(f as f64 + 0.6 * f as f64, 1.0, 20.0, 20.0));
    }
    out.push(("localization drift", d));

    let mut d = LabeledFrameSet::new();
    for f in 1..=6 {
        d.add_gt(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        d.add_pred(f, 3, bx(0.5, 0.0, 10.0, 10.0));
        d.add_pred(f, 4, bx(300.0, 300.0, 10.0, 10.0));
    }
    d.add_gt(7, 2, bx(50.0, 50.0, 10.0, 10.0));
    out.push(("false positives and late gt", d));

    let mut d = LabeledFrameSet::new();
    for f in 1..=9 {
        d.add_gt(f, 1, bx(0.0, 0.0, 10.0, 10.0));
        d.add_gt(f, 2, bx(40.0, 0.0, 10.0, 10.0));
        if f % 3 != 0 {
            d.add_pred(f, 5, bx(0.0, 1.0, 10.0, 10.0));
        }
        let id = if f < 4 { 6 } else if f < 7 { 8 } else { 6 };
        d.add_pred(f, id, bx(41.0, 0.0, 10.0, 10.0));
    }
    out.push(("fragments and returns", d));
    out
}
