//! Gap filling by Gaussian-process regression over frame index.
//!
//! For a query frame `x*` with training frames `X` and values `y`:
//!
//! ```text
//! y* = m(x*) + K(x*, X) (K(X, X) + σ²I)⁻¹ (y − m(X))
//! ```
//!
//! with an RBF kernel. Each box coordinate is regressed independently.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::linalg::spd_solve;
use crate::tracker::{HistoryEntry, TrackHistory};

/// Prior mean of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorMean {
    /// Regress raw coordinates toward zero.
    Zero,
    /// Least-squares line through the training window; the GP models the
    /// residual.
    LinearTrend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsiConfig {
    pub length_scale: f64,
    pub noise_variance: f64,
    /// Interior gaps longer than this many frames stay empty.
    pub max_gap: u32,
    /// Observed frames this far either side of a gap form its training set.
    pub context_frames: u32,
    pub prior_mean: PriorMean,
}

impl Default for GsiConfig {
    fn default() -> Self {
        Self {
            length_scale: 10.0,
            noise_variance: 0.25,
            max_gap: 30,
            context_frames: 20,
            prior_mean: PriorMean::LinearTrend,
        }
    }
}

impl GsiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) {
            return Err(Error::Config("gsi.length_scale must be > 0".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Config("gsi.noise_variance must be >= 0".into()));
        }
        if self.max_gap < 1 || self.context_frames < 1 {
            return Err(Error::Config("gsi.max_gap and gsi.context_frames must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn rbf_kernel(x1: f64, x2: f64, length_scale: f64) -> f64 {
    let d = x1 - x2;
    (-(d * d) / (2.0 * length_scale * length_scale)).exp()
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// GP posterior mean at `query` given training pairs.
pub fn gp_regress(
    train_x: &[f64],
    train_y: &[f64],
    query: &[f64],
    length_scale: f64,
    noise_variance: f64,
    prior: PriorMean,
) -> Result<Vec<f64>> {
    if train_x.len() != train_y.len() || train_x.is_empty() {
        return Err(Error::InvalidInput("GP needs matching, nonempty training data".into()));
    }
    let (intercept, slope) = match prior {
        PriorMean::Zero => (0.0, 0.0),
        PriorMean::LinearTrend => linear_fit(train_x, train_y),
    };
    let mean = |x: f64| intercept + slope * x;

    let n = train_x.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let v = rbf_kernel(train_x[i], train_x[j], length_scale);
        if i == j {
            v + noise_variance
        } else {
            v
        }
    });
    let resid = DVector::from_iterator(n, train_x.iter().zip(train_y).map(|(x, y)| y - mean(*x)));
    let weights = spd_solve(&k, &resid)?;
    Ok(query
        .iter()
        .map(|&q| {
            let ks: f64 = train_x
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| rbf_kernel(q, *x, length_scale) * w)
                .sum();
            mean(q) + ks
        })
        .collect())
}

/// Fills interior gaps of at most `max_gap` frames with interpolated boxes.
/// Observed entries are never modified.
pub fn gsi_interpolate(track: &TrackHistory, cfg: &GsiConfig) -> Result<TrackHistory> {
    cfg.validate()?;
    let observed: Vec<(i64, BoundingBox)> = track.observed().map(|(f, b)| (f, *b)).collect();
    let mut out = track.clone();
    if observed.len() < 2 {
        return Ok(out);
    }
    let ctx = cfg.context_frames as i64;
    for pair in observed.windows(2) {
        let (a, b) = (pair[0].0, pair[1].0);
        let gap = b - a - 1;
        if gap < 1 || gap > cfg.max_gap as i64 {
            continue;
        }
        let window: Vec<&(i64, BoundingBox)> = observed
            .iter()
            .filter(|(f, _)| *f >= a - ctx && *f <= b + ctx)
            .collect();
        let xs: Vec<f64> = window.iter().map(|(f, _)| *f as f64).collect();
        let queries: Vec<f64> = ((a + 1)..b).map(|f| f as f64).collect();

        let coord = |get: fn(&BoundingBox) -> f64| -> Result<Vec<f64>> {
            let ys: Vec<f64> = window.iter().map(|(_, bb)| get(bb)).collect();
            gp_regress(&xs, &ys, &queries, cfg.length_scale, cfg.noise_variance, cfg.prior_mean)
        };
        let lefts = coord(|b| b.left)?;
        let tops = coord(|b| b.top)?;
        let widths = coord(|b| b.width)?;
        let heights = coord(|b| b.height)?;

        for (k, frame) in ((a + 1)..b).enumerate() {
            if out.entries.get(&frame).is_some_and(|e| !e.interpolated) {
                continue;
            }
            let bbox = BoundingBox::new(lefts[k], tops[k], widths[k], heights[k]).map_err(|e| {
                Error::Numerical(format!("track {} frame {frame}: interpolated box invalid: {e}", track.id))
            })?;
            out.entries.insert(
                frame,
                HistoryEntry {
                    bbox,
                    interpolated: true,
                },
            );
        }
    }
    Ok(out)
}
