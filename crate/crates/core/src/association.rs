//! Fused motion + appearance costs between tracklets and detections.
//!
//! `C_ij = λ_m·d_m + λ_a·d_a` where `d_m` is the squared Mahalanobis distance
//! of detection `i` from tracklet `j`'s predicted measurement and `d_a` the
//! cosine distance between the detection embedding and the tracklet's
//! appearance. Gating is applied to the raw distances before weighting.

use nalgebra::SVector;

use crate::assignment::CostMatrix;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::Measurement;
use crate::motion::{Projection, MEAS_DIM, STATE_DIM};

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    pub lambda_m: f64,
    pub lambda_a: f64,
    /// Threshold on the squared Mahalanobis distance.
    pub motion_gate: f64,
    /// Maximum cosine distance.
    pub appearance_gate: f64,
    /// Cost written into gated cells; strictly above any feasible cost.
    pub infeasible_cost: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            lambda_m: 0.5,
            lambda_a: 0.5,
            motion_gate: CHI2_95_4DOF,
            appearance_gate: 0.1,
            infeasible_cost: 1e5,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_m < 0.0 || self.lambda_a < 0.0 || self.lambda_m + self.lambda_a <= 0.0 {
            return Err(Error::Config(format!(
                "association weights must be >= 0 and not both 0 (lambda_m {}, lambda_a {})",
                self.lambda_m, self.lambda_a
            )));
        }
        if !(self.motion_gate > 0.0 && self.appearance_gate > 0.0) {
            return Err(Error::Config("association gates must be positive".into()));
        }
        let max_feasible =
            self.lambda_m.max(1.0) * self.motion_gate + self.lambda_a * self.appearance_gate;
        if self.infeasible_cost <= max_feasible {
            return Err(Error::Config(format!(
                "association.infeasible_cost {} must exceed every feasible cost ({max_feasible})",
                self.infeasible_cost
            )));
        }
        Ok(())
    }
}

/// What association needs from a live tracklet.
#[derive(Debug, Clone, Copy)]
pub struct TrackView<'a> {
    pub projection: &'a Projection<STATE_DIM, MEAS_DIM>,
    pub appearance: Option<&'a Embedding>,
}

/// What association needs from a detection.
#[derive(Debug, Clone, Copy)]
pub struct DetectionView<'a> {
    pub measurement: Measurement,
    pub embedding: Option<&'a Embedding>,
}

/// Rows are detections, columns tracklets.
pub fn build_cost_matrix(
    tracks: &[TrackView<'_>],
    detections: &[DetectionView<'_>],
    cfg: &AssociationConfig,
) -> Result<CostMatrix> {
    let (rows, cols) = (detections.len(), tracks.len());
    let mut costs = Vec::with_capacity(rows * cols);
    let mut feasible = Vec::with_capacity(rows * cols);
    for det in detections {
        let z = SVector::<f64, MEAS_DIM>::from(det.measurement.to_array());
        for track in tracks {
            match pair_cost(track, det, &z, cfg)? {
                Some(c) => {
                    costs.push(c);
                    feasible.push(true);
                }
                None => {
                    costs.push(cfg.infeasible_cost);
                    feasible.push(false);
                }
            }
        }
    }
    Ok(CostMatrix::with_mask(rows, cols, costs, feasible))
}

fn pair_cost(
    track: &TrackView<'_>,
    det: &DetectionView<'_>,
    z: &SVector<f64, MEAS_DIM>,
    cfg: &AssociationConfig,
) -> Result<Option<f64>> {
    let d_m = track.projection.mahalanobis_squared(z)?;
    if d_m > cfg.motion_gate {
        return Ok(None);
    }
    match (track.appearance, det.embedding) {
        (Some(a), Some(e)) if cfg.lambda_a > 0.0 => {
            let d_a = 1.0 - a.similarity(e)?;
            if d_a > cfg.appearance_gate {
                return Ok(None);
            }
            Ok(Some(cfg.lambda_m * d_m + cfg.lambda_a * d_a))
        }
        (Some(_), Some(_)) => Ok(Some(cfg.lambda_m * d_m)),
        // appearance-free pair: motion alone at full weight
        _ => Ok(Some(d_m)),
    }
}
