//! Maximum-likelihood estimation of the process and observation noise
//! covariances from assigned measurement sequences.
//!
//! Both covariances are parametrized as diagonals through log-variances, so
//! unconstrained ascent keeps them positive definite. The objective is the
//! innovation log-likelihood of the filter run over all sequences; its
//! gradient is propagated exactly through the predict/update recursion, and
//! the optimizer is plain gradient ascent with a backtracking step rule.

use super::{
    apply_f_both, apply_f_vec, initial_state_from_measurement, symmetrize, KalmanError,
    KalmanState, NoiseModel, ObservationMode, StateMatrix, StateVector,
};
use nalgebra::{Cholesky, SMatrix, SVector};

/// One track's worth of measurements for training. `dts[i]` is the time gap
/// between `measurements[i]` and `measurements[i + 1]`.
#[derive(Debug, Clone)]
pub struct MeasurementSequence {
    pub measurements: Vec<Vec<f64>>,
    pub dts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NoiseEstimationOptions {
    pub max_iters: usize,
    /// Convergence threshold on the relative objective change.
    pub rel_tol: f64,
    pub init_step: f64,
    /// Positivity floor for the log-variances.
    pub min_log_var: f64,
    pub max_log_var: f64,
}

impl Default for NoiseEstimationOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-8,
            init_step: 0.25,
            min_log_var: (1e-10f64).ln(),
            max_log_var: (1e10f64).ln(),
        }
    }
}

/// Innovation log-likelihood of a diagonal (Q, R) parametrized by
/// log-variances: the first 8 parameters are the Q diagonal, the remaining
/// `mode.dim()` the R diagonal.
pub struct NoiseObjective {
    mode: ObservationMode,
    dt_ref: f64,
    sequences: Vec<MeasurementSequence>,
}

impl NoiseObjective {
    pub fn new(
        sequences: Vec<MeasurementSequence>,
        mode: ObservationMode,
        dt_ref: f64,
    ) -> Result<Self, KalmanError> {
        if sequences.is_empty() {
            return Err(KalmanError::EmptyTrainingSet);
        }
        if !(dt_ref > 0.0) {
            return Err(KalmanError::InvalidStep(dt_ref));
        }
        let m = mode.dim();
        for seq in &sequences {
            if seq.measurements.len() < 3 {
                return Err(KalmanError::SequenceTooShort {
                    len: seq.measurements.len(),
                });
            }
            if seq.dts.len() != seq.measurements.len() - 1 {
                return Err(KalmanError::TrainingFailed(format!(
                    "dt sequence length {} does not match {} measurements",
                    seq.dts.len(),
                    seq.measurements.len()
                )));
            }
            if seq.dts.iter().any(|&dt| !(dt > 0.0)) {
                return Err(KalmanError::InvalidStep(0.0));
            }
            if let Some(z) = seq.measurements.iter().find(|z| z.len() != m) {
                return Err(KalmanError::DimensionMismatch {
                    expected: m,
                    got: z.len(),
                });
            }
            if seq
                .measurements
                .iter()
                .any(|z| z.iter().any(|v| !v.is_finite()))
            {
                return Err(KalmanError::TrainingFailed(
                    "non-finite measurement in training data".into(),
                ));
            }
        }
        Ok(Self {
            mode,
            dt_ref,
            sequences,
        })
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn param_count(&self) -> usize {
        8 + self.mode.dim()
    }

    /// Log-likelihood at the given log-variances.
    pub fn value(&self, log_vars: &[f64]) -> Result<f64, KalmanError> {
        match self.mode {
            ObservationMode::SingleFrame => self.eval::<4>(log_vars, false).map(|(v, _)| v),
            ObservationMode::MultiFrame => self.eval::<6>(log_vars, false).map(|(v, _)| v),
        }
    }

    /// Log-likelihood and its gradient with respect to the log-variances.
    pub fn value_and_grad(&self, log_vars: &[f64]) -> Result<(f64, Vec<f64>), KalmanError> {
        match self.mode {
            ObservationMode::SingleFrame => {
                let (v, g) = self.eval::<4>(log_vars, true)?;
                Ok((v, g.expect("gradient requested")))
            }
            ObservationMode::MultiFrame => {
                let (v, g) = self.eval::<6>(log_vars, true)?;
                Ok((v, g.expect("gradient requested")))
            }
        }
    }

    fn eval<const M: usize>(
        &self,
        log_vars: &[f64],
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>), KalmanError> {
        let n_params = 8 + M;
        if log_vars.len() != n_params {
            return Err(KalmanError::DimensionMismatch {
                expected: n_params,
                got: log_vars.len(),
            });
        }
        let variances: Vec<f64> = log_vars.iter().map(|&t| t.exp()).collect();
        if variances.iter().any(|v| !v.is_finite()) {
            return Err(KalmanError::TrainingFailed(
                "non-finite variance parameter".into(),
            ));
        }
        let q_diag = SVector::<f64, 8>::from_iterator(variances[..8].iter().copied());
        let r = SMatrix::<f64, M, M>::from_diagonal(&SVector::<f64, M>::from_iterator(
            variances[8..].iter().copied(),
        ));

        let mut total = 0.0;
        let mut grad = vec![0.0; if with_grad { n_params } else { 0 }];

        for seq in &self.sequences {
            let first = &seq.measurements[0];
            let mut state = initial_state_from_measurement(first, self.mode)?;
            // Sensitivities of mean and covariance per parameter; the initial
            // state does not depend on the parameters.
            let mut sens: Vec<(StateVector, StateMatrix)> = if with_grad {
                vec![(StateVector::zeros(), StateMatrix::zeros()); n_params]
            } else {
                Vec::new()
            };

            for (step, z_raw) in seq.measurements.iter().enumerate().skip(1) {
                let dt = seq.dts[step - 1];
                let scale = dt / self.dt_ref;

                // predict
                let pred_mean = apply_f_vec(dt, &state.mean);
                let mut pred_cov = apply_f_both(dt, &state.covariance);
                for i in 0..8 {
                    pred_cov[(i, i)] += scale * q_diag[i];
                }
                let pred_cov = symmetrize(&pred_cov);

                let z = SVector::<f64, M>::from_column_slice(z_raw);
                let innovation = z - pred_mean.fixed_rows::<M>(0);
                let s = symmetrize(&(pred_cov.fixed_view::<M, M>(0, 0) + r));
                let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;
                let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                let u = chol.solve(&innovation);
                total += -0.5
                    * (M as f64 * (2.0 * std::f64::consts::PI).ln()
                        + log_det
                        + innovation.dot(&u));

                // update
                let ph_t = pred_cov.fixed_view::<8, M>(0, 0).into_owned();
                let gain: SMatrix<f64, 8, M> = chol.solve(&ph_t.transpose()).transpose();
                let mut l = StateMatrix::identity();
                {
                    let mut lk = l.fixed_view_mut::<8, M>(0, 0);
                    lk -= gain;
                }
                let new_mean = pred_mean + gain * innovation;
                let new_cov =
                    symmetrize(&(l * pred_cov * l.transpose() + gain * r * gain.transpose()));

                if with_grad {
                    for (idx, (a, big_a)) in sens.iter_mut().enumerate() {
                        // predicted sensitivities
                        let a_pred = apply_f_vec(dt, a);
                        let mut cov_pred = apply_f_both(dt, big_a);
                        if idx < 8 {
                            cov_pred[(idx, idx)] += scale * variances[idx];
                        }

                        // dS = H dP H^T + dR
                        let mut ds = cov_pred.fixed_view::<M, M>(0, 0).into_owned();
                        if idx >= 8 {
                            let j = idx - 8;
                            ds[(j, j)] += variances[idx];
                        }
                        let dy = -a_pred.fixed_rows::<M>(0).into_owned();

                        // d log-likelihood term
                        let s_inv_ds = chol.solve(&ds);
                        let trace: f64 = s_inv_ds.diagonal().iter().sum();
                        let quad = u.dot(&(ds * u));
                        grad[idx] += -0.5 * (trace - quad + 2.0 * u.dot(&dy));

                        if step == seq.measurements.len() - 1 {
                            // last step: posterior sensitivities unused
                            continue;
                        }

                        // dK = (dP H^T - K dS) S^-1
                        let dp_ht = cov_pred.fixed_view::<8, M>(0, 0).into_owned();
                        let rhs = dp_ht.transpose() - ds * gain.transpose();
                        let dgain: SMatrix<f64, 8, M> = chol.solve(&rhs).transpose();

                        // posterior mean sensitivity
                        let a_new = a_pred + dgain * innovation + gain * dy;

                        // posterior covariance sensitivity (Joseph form)
                        let mut dl = StateMatrix::zeros();
                        {
                            let mut dlk = dl.fixed_view_mut::<8, M>(0, 0);
                            dlk -= dgain;
                        }
                        let b = dl * pred_cov * l.transpose();
                        let c = dgain * r * gain.transpose();
                        let mut cov_new =
                            b + b.transpose() + l * cov_pred * l.transpose() + c + c.transpose();
                        if idx >= 8 {
                            let j = idx - 8;
                            let col = gain.column(j).into_owned();
                            cov_new += col * col.transpose() * variances[idx];
                        }
                        *a = a_new;
                        *big_a = symmetrize(&cov_new);
                    }
                }

                state = KalmanState {
                    mean: new_mean,
                    covariance: new_cov,
                };
            }
        }

        if !total.is_finite() {
            return Err(KalmanError::TrainingFailed(
                "objective became non-finite".into(),
            ));
        }
        Ok((total, if with_grad { Some(grad) } else { None }))
    }

    /// Second-difference heuristic for the starting point: for constant
    /// velocity data the second difference of a component is dominated by
    /// measurement noise with variance 6R.
    fn initial_log_vars(&self) -> Vec<f64> {
        let m = self.mode.dim();
        let mut r_init = vec![0.0f64; m];
        for (j, slot) in r_init.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut count = 0usize;
            for seq in &self.sequences {
                for w in seq.measurements.windows(3) {
                    let dd = w[2][j] - 2.0 * w[1][j] + w[0][j];
                    sum += dd;
                    sum_sq += dd * dd;
                    count += 1;
                }
            }
            let var = if count > 0 {
                (sum_sq / count as f64 - (sum / count as f64).powi(2)).max(0.0) / 6.0
            } else {
                1.0
            };
            *slot = var.max(1e-8);
        }
        let mean_pos_r = r_init[..4].iter().sum::<f64>() / 4.0;
        let q_init = (0.1 * mean_pos_r).max(1e-8);
        let mut out = vec![q_init.ln(); 8];
        out.extend(r_init.iter().map(|v| v.ln()));
        out
    }
}

fn clamp_params(params: &mut [f64], opts: &NoiseEstimationOptions) {
    for p in params {
        *p = p.clamp(opts.min_log_var, opts.max_log_var);
    }
}

/// Estimates diagonal Q and R by gradient ascent on the innovation
/// log-likelihood. Returns the model plus the trace of accepted objective
/// values (non-decreasing by construction).
pub fn estimate_noise_detailed(
    sequences: &[MeasurementSequence],
    mode: ObservationMode,
    dt_ref: f64,
    opts: &NoiseEstimationOptions,
) -> Result<(NoiseModel, Vec<f64>), KalmanError> {
    let objective = NoiseObjective::new(sequences.to_vec(), mode, dt_ref)?;
    let mut params = objective.initial_log_vars();
    clamp_params(&mut params, opts);

    let (mut value, mut grad) = objective.value_and_grad(&params)?;
    let mut trace = vec![value];
    let mut step = opts.init_step;

    for _ in 0..opts.max_iters {
        let mut accepted = false;
        for _ in 0..60 {
            let mut candidate: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p + step * g)
                .collect();
            clamp_params(&mut candidate, opts);
            match objective.value(&candidate) {
                Ok(cand_value) if cand_value >= value => {
                    let rel_change = (cand_value - value).abs() / value.abs().max(1.0);
                    params = candidate;
                    let improved_value = cand_value;
                    (value, grad) = objective.value_and_grad(&params)?;
                    debug_assert!((value - improved_value).abs() < 1e-9 * value.abs().max(1.0));
                    trace.push(value);
                    accepted = true;
                    step = (step * 2.0).min(10.0);
                    if rel_change < opts.rel_tol {
                        let model = model_from_params(&params, mode, dt_ref)?;
                        return Ok((model, trace));
                    }
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            break;
        }
    }

    let model = model_from_params(&params, mode, dt_ref)?;
    Ok((model, trace))
}

/// See [`estimate_noise_detailed`]; this drops the objective trace.
pub fn estimate_noise(
    sequences: &[MeasurementSequence],
    mode: ObservationMode,
    dt_ref: f64,
    opts: &NoiseEstimationOptions,
) -> Result<NoiseModel, KalmanError> {
    estimate_noise_detailed(sequences, mode, dt_ref, opts).map(|(model, _)| model)
}

fn model_from_params(
    params: &[f64],
    mode: ObservationMode,
    dt_ref: f64,
) -> Result<NoiseModel, KalmanError> {
    let mut q = [0.0; 8];
    for (i, slot) in q.iter_mut().enumerate() {
        *slot = params[i].exp();
    }
    match mode {
        ObservationMode::SingleFrame => {
            let mut r4 = [0.0; 4];
            for (i, slot) in r4.iter_mut().enumerate() {
                *slot = params[8 + i].exp();
            }
            // The velocity entries were not observed; derive them from the
            // position noise as the variance of a one-step finite difference.
            let mean_pos = r4.iter().sum::<f64>() / 4.0;
            let vel = 2.0 * mean_pos / (dt_ref * dt_ref);
            let r6 = [r4[0], r4[1], r4[2], r4[3], vel, vel];
            NoiseModel::diagonal(q, r4, r6, dt_ref)
        }
        ObservationMode::MultiFrame => {
            let mut r6 = [0.0; 6];
            for (i, slot) in r6.iter_mut().enumerate() {
                *slot = params[8 + i].exp();
            }
            let r4 = [r6[0], r6[1], r6[2], r6[3]];
            NoiseModel::diagonal(q, r4, r6, dt_ref)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_line_sequence(n: usize, dt: f64) -> MeasurementSequence {
        let measurements = (0..n)
            .map(|t| {
                let s = t as f64 * dt;
                vec![10.0 + 3.0 * s, 20.0 - 2.0 * s, 8.0, 6.0]
            })
            .collect();
        MeasurementSequence {
            measurements,
            dts: vec![dt; n - 1],
        }
    }

    #[test]
    fn rejects_empty_and_short_input() {
        let opts = NoiseEstimationOptions::default();
        assert!(matches!(
            estimate_noise(&[], ObservationMode::SingleFrame, 0.1, &opts),
            Err(KalmanError::EmptyTrainingSet)
        ));
        let short = MeasurementSequence {
            measurements: vec![vec![0.0; 4], vec![0.0; 4]],
            dts: vec![0.1],
        };
        assert!(matches!(
            estimate_noise(&[short], ObservationMode::SingleFrame, 0.1, &opts),
            Err(KalmanError::SequenceTooShort { len: 2 })
        ));
    }

    #[test]
    fn noiseless_data_drives_variances_to_floor() {
        let seqs: Vec<_> = (0..4).map(|_| straight_line_sequence(40, 0.1)).collect();
        let opts = NoiseEstimationOptions::default();
        let model = estimate_noise(&seqs, ObservationMode::SingleFrame, 0.1, &opts).unwrap();
        for i in 0..8 {
            assert!(
                model.process_q[(i, i)] <= 1e-4,
                "q[{i}] = {}",
                model.process_q[(i, i)]
            );
        }
        for i in 0..4 {
            assert!(
                model.obs_r_single[(i, i)] <= 1e-4,
                "r[{i}] = {}",
                model.obs_r_single[(i, i)]
            );
        }
    }

    #[test]
    fn objective_never_decreases_along_trace() {
        let seqs: Vec<_> = (0..3).map(|_| straight_line_sequence(20, 0.05)).collect();
        let opts = NoiseEstimationOptions::default();
        let (_, trace) =
            estimate_noise_detailed(&seqs, ObservationMode::SingleFrame, 0.05, &opts).unwrap();
        for pair in trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9);
        }
        assert!(trace.last().unwrap() >= trace.first().unwrap());
    }
}
