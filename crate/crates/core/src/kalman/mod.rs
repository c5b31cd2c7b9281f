//! Constant-velocity Kalman filter over the 8-dimensional box state
//! `(p_x, p_y, p_w, p_h, v_x, v_y, v_w, v_h)`, the Mahalanobis gating
//! distance, and data-driven estimation of the noise covariances.
//!
//! Positions are observed directly, so the observation matrix is a leading
//! identity block: the single-frame mode observes the four box parameters,
//! the multi-frame mode additionally observes `v_x` and `v_y` derived from
//! the detector's displacement vectors.

mod estimate;

pub use estimate::{
    estimate_noise, estimate_noise_detailed, MeasurementSequence, NoiseEstimationOptions,
    NoiseObjective,
};

use crate::detection::Detection;
use nalgebra::{Cholesky, SMatrix, SVector};
use thiserror::Error;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;

/// Diagonal entry of the initial covariance for the position components of a
/// fresh track. Velocities start 100x as uncertain.
pub const INIT_POSITION_VAR: f64 = 10.0;
pub const INIT_VELOCITY_VAR: f64 = 100.0 * INIT_POSITION_VAR;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("measurement has {got} components, mode expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("multi-frame measurement requires a displacement vector")]
    MissingDisplacement,
    #[error("noise estimation needs at least one sequence")]
    EmptyTrainingSet,
    #[error("sequence of {len} measurements is too short (need at least 3)")]
    SequenceTooShort { len: usize },
    #[error("noise estimation failed: {0}")]
    TrainingFailed(String),
}

/// Which components of the state a measurement carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// Observe `(p_x, p_y, p_w, p_h)`.
    SingleFrame,
    /// Additionally observe `(v_x, v_y)` from the displacement estimate.
    MultiFrame,
}

impl ObservationMode {
    pub fn dim(&self) -> usize {
        match self {
            ObservationMode::SingleFrame => 4,
            ObservationMode::MultiFrame => 6,
        }
    }
}

/// Gaussian state of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanState {
    /// Builds a state, rejecting asymmetric or non-positive-definite
    /// covariances.
    pub fn new(mean: StateVector, covariance: StateMatrix) -> Result<Self, KalmanError> {
        let asym = (covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(KalmanError::NotPositiveDefinite);
        }
        let covariance = symmetrize(&covariance);
        if Cholesky::new(covariance).is_none() {
            return Err(KalmanError::NotPositiveDefinite);
        }
        Ok(Self { mean, covariance })
    }
}

/// Process and observation noise covariances. `process_q` applies per
/// nominal frame interval `dt_ref` and is rescaled linearly for other step
/// lengths, which keeps the filter consistent across dropped frames.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub process_q: StateMatrix,
    pub obs_r_single: SMatrix<f64, 4, 4>,
    pub obs_r_multi: SMatrix<f64, 6, 6>,
    /// Nominal frame interval in seconds.
    pub dt_ref: f64,
}

impl NoiseModel {
    pub fn new(
        process_q: StateMatrix,
        obs_r_single: SMatrix<f64, 4, 4>,
        obs_r_multi: SMatrix<f64, 6, 6>,
        dt_ref: f64,
    ) -> Result<Self, KalmanError> {
        if !(dt_ref > 0.0) {
            return Err(KalmanError::InvalidStep(dt_ref));
        }
        check_symmetric_psd(&process_q, true)?;
        check_symmetric_psd(&obs_r_single, false)?;
        check_symmetric_psd(&obs_r_multi, false)?;
        Ok(Self {
            process_q,
            obs_r_single,
            obs_r_multi,
            dt_ref,
        })
    }

    /// Diagonal noise model; `q_diag` entries may be zero, `r` entries must
    /// be positive.
    pub fn diagonal(
        q_diag: [f64; 8],
        r_single_diag: [f64; 4],
        r_multi_diag: [f64; 6],
        dt_ref: f64,
    ) -> Result<Self, KalmanError> {
        Self::new(
            StateMatrix::from_diagonal(&SVector::from(q_diag)),
            SMatrix::from_diagonal(&SVector::from(r_single_diag)),
            SMatrix::from_diagonal(&SVector::from(r_multi_diag)),
            dt_ref,
        )
    }

    /// Process noise scaled for a step of `dt` seconds.
    pub fn scaled_q(&self, dt: f64) -> StateMatrix {
        self.process_q * (dt / self.dt_ref)
    }
}

fn check_symmetric_psd<const N: usize>(
    m: &SMatrix<f64, N, N>,
    allow_semidefinite: bool,
) -> Result<(), KalmanError> {
    if (m - m.transpose()).amax() > SYMMETRY_TOL {
        return Err(KalmanError::NotPositiveDefinite);
    }
    let candidate = if allow_semidefinite {
        // shift into the strictly definite range before factorizing
        let shift = 1e-12 * (1.0 + m.diagonal().amax());
        symmetrize(m) + SMatrix::<f64, N, N>::identity() * shift
    } else {
        symmetrize(m)
    };
    if Cholesky::new(candidate).is_none() {
        return Err(KalmanError::NotPositiveDefinite);
    }
    Ok(())
}

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Constant-velocity state transition matrix: identity plus `dt` coupling
/// each position component to its velocity.
pub fn transition_matrix(dt: f64) -> Result<StateMatrix, KalmanError> {
    if !(dt > 0.0) {
        return Err(KalmanError::InvalidStep(dt));
    }
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = dt;
    }
    Ok(f)
}

/// Applies the transition matrix from the left without materializing it:
/// rows 0..4 gain `dt` times rows 4..8.
pub(crate) fn apply_f_vec(dt: f64, v: &StateVector) -> StateVector {
    let mut out = *v;
    for i in 0..4 {
        out[i] += dt * v[i + 4];
    }
    out
}

/// Computes `F * M * F^T` using the sparsity of `F`.
pub(crate) fn apply_f_both(dt: f64, m: &StateMatrix) -> StateMatrix {
    let mut out = *m;
    // left multiply: rows 0..4 += dt * rows 4..8
    for i in 0..4 {
        for j in 0..8 {
            out[(i, j)] += dt * m[(i + 4, j)];
        }
    }
    // right multiply by F^T: cols 0..4 += dt * cols 4..8 (of the row-updated matrix)
    let tmp = out;
    for j in 0..4 {
        for i in 0..8 {
            out[(i, j)] += dt * tmp[(i, j + 4)];
        }
    }
    out
}

/// Prediction step: propagates the state by `dt` seconds and inflates the
/// covariance by the scaled process noise.
pub fn predict(state: &KalmanState, dt: f64, noise: &NoiseModel) -> Result<KalmanState, KalmanError> {
    if !(dt > 0.0) {
        return Err(KalmanError::InvalidStep(dt));
    }
    if Cholesky::new(state.covariance).is_none() {
        return Err(KalmanError::NotPositiveDefinite);
    }
    let mean = apply_f_vec(dt, &state.mean);
    let covariance = symmetrize(&(apply_f_both(dt, &state.covariance) + noise.scaled_q(dt)));
    Ok(KalmanState { mean, covariance })
}

fn as_svector<const M: usize>(z: &[f64]) -> Result<SVector<f64, M>, KalmanError> {
    if z.len() != M {
        return Err(KalmanError::DimensionMismatch {
            expected: M,
            got: z.len(),
        });
    }
    Ok(SVector::from_column_slice(z))
}

pub(crate) fn update_impl<const M: usize>(
    state: &KalmanState,
    z: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
) -> Result<KalmanState, KalmanError> {
    let p = &state.covariance;
    let innovation = z - state.mean.fixed_rows::<M>(0);
    let s = symmetrize(&(p.fixed_view::<M, M>(0, 0) + r));
    let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;

    // K = P H^T S^-1, via S K^T = H P
    let ph_t = p.fixed_view::<8, M>(0, 0).into_owned();
    let gain = chol.solve(&ph_t.transpose()).transpose();

    let mean = state.mean + gain * innovation;

    // Joseph form: (I - K H) P (I - K H)^T + K R K^T
    let mut l = StateMatrix::identity();
    let mut lk = l.fixed_view_mut::<8, M>(0, 0);
    lk -= gain;
    let covariance = symmetrize(&(l * p * l.transpose() + gain * r * gain.transpose()));
    Ok(KalmanState { mean, covariance })
}

/// Measurement update with the observation selected by `mode`. The
/// measurement slice must be `(p_x, p_y, p_w, p_h)` or, in multi-frame mode,
/// `(p_x, p_y, p_w, p_h, v_x, v_y)`.
pub fn update(
    state: &KalmanState,
    measurement: &[f64],
    mode: ObservationMode,
    noise: &NoiseModel,
) -> Result<KalmanState, KalmanError> {
    match mode {
        ObservationMode::SingleFrame => {
            update_impl::<4>(state, &as_svector(measurement)?, &noise.obs_r_single)
        }
        ObservationMode::MultiFrame => {
            update_impl::<6>(state, &as_svector(measurement)?, &noise.obs_r_multi)
        }
    }
}

fn mahalanobis_impl<const M: usize>(
    state: &KalmanState,
    z: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
) -> Result<f64, KalmanError> {
    let innovation = z - state.mean.fixed_rows::<M>(0);
    let s = symmetrize(&(state.covariance.fixed_view::<M, M>(0, 0) + r));
    let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;
    let solved = chol.solve(&innovation);
    Ok(innovation.dot(&solved).max(0.0).sqrt())
}

/// Mahalanobis distance of a measurement from the predicted state:
/// `sqrt(y^T S^-1 y)` with `S = H P H^T + R`. The state must already be
/// predicted to the measurement's time.
pub fn mahalanobis(
    state: &KalmanState,
    measurement: &[f64],
    mode: ObservationMode,
    noise: &NoiseModel,
) -> Result<f64, KalmanError> {
    match mode {
        ObservationMode::SingleFrame => {
            mahalanobis_impl::<4>(state, &as_svector(measurement)?, &noise.obs_r_single)
        }
        ObservationMode::MultiFrame => {
            mahalanobis_impl::<6>(state, &as_svector(measurement)?, &noise.obs_r_multi)
        }
    }
}

/// Builds the measurement vector a detection contributes. In multi-frame
/// mode the displacement points one frame back in time, so the observed
/// velocity is `-displacement / dt`.
pub fn detection_measurement(
    detection: &Detection,
    mode: ObservationMode,
    dt: f64,
) -> Result<Vec<f64>, KalmanError> {
    let b = &detection.box_;
    match mode {
        ObservationMode::SingleFrame => Ok(vec![b.cx, b.cy, b.w, b.h]),
        ObservationMode::MultiFrame => {
            if !(dt > 0.0) {
                return Err(KalmanError::InvalidStep(dt));
            }
            let (dx, dy) = detection
                .displacement
                .ok_or(KalmanError::MissingDisplacement)?;
            Ok(vec![b.cx, b.cy, b.w, b.h, -dx / dt, -dy / dt])
        }
    }
}

/// Initial state for a fresh track: positions copied from the first
/// measurement, velocities zero unless directly observed, and a diagonal
/// covariance with large velocity variance.
pub fn initial_state_from_measurement(
    measurement: &[f64],
    mode: ObservationMode,
) -> Result<KalmanState, KalmanError> {
    if measurement.len() != mode.dim() {
        return Err(KalmanError::DimensionMismatch {
            expected: mode.dim(),
            got: measurement.len(),
        });
    }
    let mut mean = StateVector::zeros();
    for i in 0..4 {
        mean[i] = measurement[i];
    }
    if mode == ObservationMode::MultiFrame {
        mean[4] = measurement[4];
        mean[5] = measurement[5];
    }
    let mut diag = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        diag[i] = INIT_POSITION_VAR;
        diag[i + 4] = INIT_VELOCITY_VAR;
    }
    Ok(KalmanState {
        mean,
        covariance: StateMatrix::from_diagonal(&diag),
    })
}
