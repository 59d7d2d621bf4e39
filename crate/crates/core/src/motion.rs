//! Unscented Kalman filtering of box motion.
//!
//! The filter is generic over the state dimension `N` and measurement
//! dimension `M`; trackers use the 8-dimensional [`ConstantVelocity`] box
//! model with state `(cx, cy, aspect, h, vcx, vcy, vaspect, vh)`.
//!
//! Sigma points follow the scaled symmetric selection
//!
//! ```text
//! λ  = α²(n + κ) − n
//! χ₀ = μ,   χᵢ = μ ± √(n + λ)·Lᵢ   (L Lᵀ = P)
//! Wm₀ = λ/(n + λ),  Wc₀ = Wm₀ + 1 − α² + β,  Wᵢ = 1/(2(n + λ))
//! ```

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::Measurement;
use crate::linalg::{covariance_sqrt, symmetrize};

pub const STATE_DIM: usize = 8;
pub const MEAS_DIM: usize = 4;

const MIN_HEIGHT: f64 = 1e-3;
const MIN_ASPECT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState<const N: usize> {
    pub mean: SVector<f64, N>,
    pub covariance: SMatrix<f64, N, N>,
}

/// Box motion state: mean `(cx, cy, aspect, h, vcx, vcy, vaspect, vh)` with
/// per-frame velocities, and its covariance.
pub type MotionState = GaussianState<STATE_DIM>;

impl<const N: usize> GaussianState<N> {
    pub fn new(mean: SVector<f64, N>, covariance: SMatrix<f64, N, N>) -> Self {
        Self { mean, covariance }
    }
}

impl MotionState {
    /// Predicted box measurement (the position half of the mean).
    pub fn measurement(&self) -> Measurement {
        Measurement {
            cx: self.mean[0],
            cy: self.mean[1],
            aspect: self.mean[2],
            h: self.mean[3],
        }
    }
}

/// Unscented transform scaling plus the height-relative noise factors.
///
/// Noise factors are standard deviations per unit of box height, except the
/// aspect entries (index 2 and 6 of the process factors, index 2 of the
/// measurement factors) which are absolute because aspect is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub process_noise_scale: [f64; STATE_DIM],
    pub measurement_noise_scale: [f64; MEAS_DIM],
}

impl Default for UkfParams {
    fn default() -> Self {
        let pos = 1.0 / 20.0;
        let vel = 1.0 / 160.0;
        Self {
            alpha: 0.5,
            beta: 2.0,
            kappa: 3.0 - STATE_DIM as f64,
            process_noise_scale: [pos, pos, 1e-2, pos, vel, vel, 1e-5, vel],
            measurement_noise_scale: [pos, pos, 1e-1, pos],
        }
    }
}

impl UkfParams {
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("ukf.alpha {} outside (0, 1]", self.alpha)));
        }
        let spread = n as f64 + self.lambda(n);
        if !(spread > 1e-12 && spread.is_finite()) {
            return Err(Error::Config(format!(
                "ukf scaling gives n + lambda = {spread}"
            )));
        }
        if self
            .process_noise_scale
            .iter()
            .chain(self.measurement_noise_scale.iter())
            .any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::Config("ukf noise scales must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SigmaPoints<const N: usize> {
    pub points: Vec<SVector<f64, N>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

pub fn sigma_points<const N: usize>(
    state: &GaussianState<N>,
    params: &UkfParams,
) -> Result<SigmaPoints<N>> {
    let lambda = params.lambda(N);
    let spread = N as f64 + lambda;
    if !(spread > 1e-12 && spread.is_finite()) {
        return Err(Error::Config(format!(
            "ukf scaling gives n + lambda = {spread} for n = {N}; it must be positive"
        )));
    }
    let root = covariance_sqrt(&state.covariance)? * spread.sqrt();

    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(state.mean);
    for i in 0..N {
        points.push(state.mean + root.column(i));
    }
    for i in 0..N {
        points.push(state.mean - root.column(i));
    }

    let w0 = lambda / spread;
    let wi = 1.0 / (2.0 * spread);
    let mut mean_weights = vec![wi; 2 * N + 1];
    let mut cov_weights = vec![wi; 2 * N + 1];
    mean_weights[0] = w0;
    cov_weights[0] = w0 + 1.0 - params.alpha * params.alpha + params.beta;
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

/// State transition and measurement functions for the filter, plus their
/// additive noise covariances.
pub trait TransitionModel<const N: usize, const M: usize> {
    fn transition(&self, state: &SVector<f64, N>, dt: f64) -> SVector<f64, N>;

    fn measure(&self, state: &SVector<f64, N>) -> SVector<f64, M>;

    fn process_noise(&self, state: &SVector<f64, N>, dt: f64, params: &UkfParams)
        -> SMatrix<f64, N, N>;

    fn measurement_noise(&self, state: &SVector<f64, N>, params: &UkfParams) -> SMatrix<f64, M, M>;

    /// Projects a posterior mean back onto the valid state set.
    fn constrain(&self, _state: &mut SVector<f64, N>) {}
}

/// Constant-velocity box model; noise standard deviations follow box height.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl ConstantVelocity {
    /// Initial state for a fresh track: zero velocity, wide covariance.
    pub fn initiate(&self, z: &Measurement, params: &UkfParams) -> MotionState {
        let mut mean = SVector::<f64, STATE_DIM>::zeros();
        mean.fixed_rows_mut::<MEAS_DIM>(0)
            .copy_from(&SVector::from(z.to_array()));
        let h = z.h;
        let p = &params.process_noise_scale;
        let stds = [
            2.0 * p[0] * h,
            2.0 * p[1] * h,
            p[2],
            2.0 * p[3] * h,
            10.0 * p[4] * h,
            10.0 * p[5] * h,
            p[6],
            10.0 * p[7] * h,
        ];
        let var = SVector::<f64, STATE_DIM>::from_iterator(stds.iter().map(|s| s * s));
        MotionState::new(mean, SMatrix::from_diagonal(&var))
    }

    pub fn transition_matrix(dt: f64) -> SMatrix<f64, STATE_DIM, STATE_DIM> {
        let mut f = SMatrix::<f64, STATE_DIM, STATE_DIM>::identity();
        for i in 0..MEAS_DIM {
            f[(i, i + MEAS_DIM)] = dt;
        }
        f
    }
}

fn height_scaled(h: f64, i: usize, aspect_index: usize, scale: f64) -> f64 {
    if i == aspect_index {
        scale
    } else {
        scale * h
    }
}

impl TransitionModel<STATE_DIM, MEAS_DIM> for ConstantVelocity {
    fn transition(&self, state: &SVector<f64, STATE_DIM>, dt: f64) -> SVector<f64, STATE_DIM> {
        let mut next = *state;
        for i in 0..MEAS_DIM {
            next[i] += dt * state[i + MEAS_DIM];
        }
        next
    }

    fn measure(&self, state: &SVector<f64, STATE_DIM>) -> SVector<f64, MEAS_DIM> {
        state.fixed_rows::<MEAS_DIM>(0).into_owned()
    }

    fn process_noise(
        &self,
        state: &SVector<f64, STATE_DIM>,
        dt: f64,
        params: &UkfParams,
    ) -> SMatrix<f64, STATE_DIM, STATE_DIM> {
        let h = state[3].abs();
        let var = SVector::<f64, STATE_DIM>::from_fn(|i, _| {
            let aspect_index = if i < MEAS_DIM { 2 } else { 6 };
            let s = height_scaled(h, i, aspect_index, params.process_noise_scale[i]);
            s * s * dt
        });
        SMatrix::from_diagonal(&var)
    }

    fn measurement_noise(
        &self,
        state: &SVector<f64, STATE_DIM>,
        params: &UkfParams,
    ) -> SMatrix<f64, MEAS_DIM, MEAS_DIM> {
        let h = state[3].abs();
        let var = SVector::<f64, MEAS_DIM>::from_fn(|i, _| {
            let s = height_scaled(h, i, 2, params.measurement_noise_scale[i]);
            s * s
        });
        SMatrix::from_diagonal(&var)
    }

    fn constrain(&self, state: &mut SVector<f64, STATE_DIM>) {
        state[2] = state[2].max(MIN_ASPECT);
        state[3] = state[3].max(MIN_HEIGHT);
    }
}

pub fn predict<const N: usize, const M: usize, T: TransitionModel<N, M>>(
    state: &GaussianState<N>,
    model: &T,
    params: &UkfParams,
    dt: f64,
) -> Result<GaussianState<N>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("predict needs dt > 0, got {dt}")));
    }
    let sp = sigma_points(state, params)?;
    let propagated: Vec<SVector<f64, N>> =
        sp.points.iter().map(|x| model.transition(x, dt)).collect();
    let mean = weighted_mean(&propagated, &sp.mean_weights);
    let mut cov = model.process_noise(&state.mean, dt, params);
    for (x, w) in propagated.iter().zip(&sp.cov_weights) {
        let d = x - mean;
        cov += d * d.transpose() * *w;
    }
    Ok(GaussianState::new(mean, symmetrize(&cov)))
}

/// Predicted measurement distribution of a state together with the
/// state/measurement cross covariance.
#[derive(Debug, Clone, Copy)]
pub struct Projection<const N: usize, const M: usize> {
    pub mean: SVector<f64, M>,
    pub covariance: SMatrix<f64, M, M>,
    pub cross: SMatrix<f64, N, M>,
}

impl<const N: usize, const M: usize> Projection<N, M> {
    pub fn mahalanobis_squared(&self, z: &SVector<f64, M>) -> Result<f64> {
        innovation_mahalanobis_squared(&(z - self.mean), &self.covariance)
    }
}

pub fn project<const N: usize, const M: usize, T: TransitionModel<N, M>>(
    state: &GaussianState<N>,
    model: &T,
    params: &UkfParams,
) -> Result<Projection<N, M>> {
    let sp = sigma_points(state, params)?;
    let measured: Vec<SVector<f64, M>> = sp.points.iter().map(|x| model.measure(x)).collect();
    let mean = weighted_mean(&measured, &sp.mean_weights);
    let mut covariance = model.measurement_noise(&state.mean, params);
    let mut cross = SMatrix::<f64, N, M>::zeros();
    for ((z, x), w) in measured.iter().zip(&sp.points).zip(&sp.cov_weights) {
        let dz = z - mean;
        covariance += dz * dz.transpose() * *w;
        cross += (x - state.mean) * dz.transpose() * *w;
    }
    Ok(Projection {
        mean,
        covariance: symmetrize(&covariance),
        cross,
    })
}

pub fn update<const N: usize, const M: usize, T: TransitionModel<N, M>>(
    state: &GaussianState<N>,
    z: &SVector<f64, M>,
    model: &T,
    params: &UkfParams,
) -> Result<GaussianState<N>> {
    let proj = project(state, model, params)?;
    update_with(state, &proj, z, model)
}

/// Measurement update reusing a projection computed for gating.
pub fn update_with<const N: usize, const M: usize, T: TransitionModel<N, M>>(
    state: &GaussianState<N>,
    proj: &Projection<N, M>,
    z: &SVector<f64, M>,
    model: &T,
) -> Result<GaussianState<N>> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite measurement".into()));
    }
    let s_inv = proj
        .covariance
        .try_inverse()
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    let gain = proj.cross * s_inv;
    let mut mean = state.mean + gain * (z - proj.mean);
    model.constrain(&mut mean);
    let covariance = state.covariance - gain * proj.covariance * gain.transpose();
    Ok(GaussianState::new(mean, symmetrize(&covariance)))
}

pub fn innovation_mahalanobis_squared<const M: usize>(
    innovation: &SVector<f64, M>,
    s: &SMatrix<f64, M, M>,
) -> Result<f64> {
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    let solved = chol.solve(innovation);
    Ok(innovation.dot(&solved).max(0.0))
}

/// Mahalanobis distance (not squared) of `z` from the state's predicted
/// measurement.
pub fn mahalanobis<const N: usize, const M: usize, T: TransitionModel<N, M>>(
    state: &GaussianState<N>,
    z: &SVector<f64, M>,
    model: &T,
    params: &UkfParams,
) -> Result<f64> {
    Ok(project(state, model, params)?.mahalanobis_squared(z)?.sqrt())
}

fn weighted_mean<const K: usize>(points: &[SVector<f64, K>], weights: &[f64]) -> SVector<f64, K> {
    points
        .iter()
        .zip(weights)
        .fold(SVector::<f64, K>::zeros(), |acc, (p, w)| acc + p * *w)
}
