//! End-to-end feature-ablation battery: train the noise model and the SVM
//! on one simulated scenario, then track fresh evaluation scenarios with
//! the four association feature sets and compare the CLEAR MOT results.
//!
//! Configurations that use the displacement metric run the filter in
//! multi-frame observation mode, since the displacement estimates are what
//! make the velocity components observable; the other configurations use
//! the single-frame mode.

use crate::assoc::{svm_train, FeatureSet, SvmModel};
use crate::kalman::{
    estimate_noise, NoiseEstimationOptions, NoiseModel, ObservationMode,
};
use crate::metrics::{evaluate, MetricsError, MotReport};
use crate::simulator::{generate, residual_sequences, svm_samples, ScenarioConfig, SimError};
use crate::tracker::{run_sequence, TrackerConfig, TrackerError};
use crate::assoc::AssocError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Kalman(#[from] crate::kalman::KalmanError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// The four feature sets of the ablation battery, in battery order:
/// class+filter, +displacement, +embedding, and everything.
pub fn feature_battery() -> [FeatureSet; 4] {
    let base = FeatureSet {
        embedding: false,
        displacement: false,
        mahalanobis: true,
        class_cost: true,
    };
    [
        base,
        FeatureSet {
            displacement: true,
            ..base
        },
        FeatureSet {
            embedding: true,
            ..base
        },
        FeatureSet {
            embedding: true,
            displacement: true,
            ..base
        },
    ]
}

/// Short label like "C,KF,D" for a feature set, in battery notation.
pub fn feature_label(set: &FeatureSet) -> String {
    let mut parts = Vec::new();
    if set.class_cost {
        parts.push("C");
    }
    if set.mahalanobis {
        parts.push("KF");
    }
    if set.displacement {
        parts.push("D");
    }
    if set.embedding {
        parts.push("E");
    }
    parts.join(",")
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Scenario used to fit the noise model and the SVM.
    pub train_scenario: ScenarioConfig,
    /// Scenario template for evaluation; its seed is replaced per repeat.
    pub eval_scenario: ScenarioConfig,
    pub n_eval_seeds: u64,
    pub base_seed: u64,
    pub reg_c: f64,
    pub epochs: usize,
    pub iou_threshold: f64,
    pub stable_hits: u32,
    pub max_unobserved: f64,
    pub emit_tentative: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // A crowded scene with frequent crossings and a lossy detector, so
        // the association metrics actually matter.
        let eval_scenario = ScenarioConfig {
            n_frames: 600,
            fps: 30.0,
            image_size: (960.0, 540.0),
            n_objects: 10,
            process_sigma: 4.0,
            measurement_sigma: 1.5,
            miss_prob: 0.25,
            fp_rate: 1.0,
            n_classes: 4,
            class_confusion_prob: 0.15,
            box_size_range: (35.0, 60.0),
            init_speed: 180.0,
            ..ScenarioConfig::default()
        };
        let train_scenario = ScenarioConfig {
            n_frames: 400,
            ..eval_scenario.clone()
        };
        Self {
            train_scenario,
            eval_scenario,
            n_eval_seeds: 20,
            base_seed: 1,
            // The pair data is heavily imbalanced (one positive per track
            // and frame against every other detection), so the battery
            // needs a much weaker regularizer and a longer run than the
            // small-scene defaults.
            reg_c: 1e4,
            epochs: 1000,
            iou_threshold: 0.5,
            stable_hits: 3,
            max_unobserved: 0.5,
            emit_tentative: false,
        }
    }
}

/// Field means over per-seed reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMetrics {
    pub motp: f64,
    pub mota: f64,
    pub r_m: f64,
    pub r_fp: f64,
    pub r_mme: f64,
    pub mostly_tracked: f64,
    pub partially_tracked: f64,
    pub mostly_lost: f64,
}

pub fn mean_metrics(reports: &[MotReport]) -> MeanMetrics {
    let n = reports.len().max(1) as f64;
    let sum = |f: fn(&MotReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    MeanMetrics {
        motp: sum(|r| r.motp),
        mota: sum(|r| r.mota),
        r_m: sum(|r| r.r_m),
        r_fp: sum(|r| r.r_fp),
        r_mme: sum(|r| r.r_mme),
        mostly_tracked: sum(|r| r.mostly_tracked),
        partially_tracked: sum(|r| r.partially_tracked),
        mostly_lost: sum(|r| r.mostly_lost),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub features: FeatureSet,
    pub mode: ObservationMode,
    pub reports: Vec<MotReport>,
}

impl ExperimentOutcome {
    pub fn mean(&self) -> MeanMetrics {
        mean_metrics(&self.reports)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcomes: Vec<ExperimentOutcome>,
}

/// A feature set containing the displacement metric runs in multi-frame
/// observation mode.
pub fn mode_for(features: &FeatureSet) -> ObservationMode {
    if features.displacement {
        ObservationMode::MultiFrame
    } else {
        ObservationMode::SingleFrame
    }
}

/// Trained models shared by every evaluation seed of one battery run.
pub struct FittedModels {
    pub noise_single: NoiseModel,
    pub noise_multi: NoiseModel,
    pub svms: Vec<SvmModel>,
}

impl FittedModels {
    pub fn noise_for(&self, mode: ObservationMode) -> &NoiseModel {
        match mode {
            ObservationMode::SingleFrame => &self.noise_single,
            ObservationMode::MultiFrame => &self.noise_multi,
        }
    }
}

/// Fits the two noise models and one SVM per battery feature set on the
/// training scenario.
pub fn fit_models(config: &ExperimentConfig) -> Result<FittedModels, ExperimentError> {
    let mut train_scenario = config.train_scenario.clone();
    train_scenario.seed = config.base_seed;
    let (gt, frames) = generate(&train_scenario)?;
    let dt_ref = train_scenario.dt();
    let opts = NoiseEstimationOptions::default();

    let seq_single = residual_sequences(&gt, &frames, ObservationMode::SingleFrame)?;
    let noise_single = estimate_noise(&seq_single, ObservationMode::SingleFrame, dt_ref, &opts)?;
    let seq_multi = residual_sequences(&gt, &frames, ObservationMode::MultiFrame)?;
    let noise_multi = estimate_noise(&seq_multi, ObservationMode::MultiFrame, dt_ref, &opts)?;

    let samples_single = svm_samples(&gt, &frames, &noise_single, ObservationMode::SingleFrame)?;
    let samples_multi = svm_samples(&gt, &frames, &noise_multi, ObservationMode::MultiFrame)?;

    let mut svms = Vec::new();
    for (index, features) in feature_battery().iter().enumerate() {
        let samples = match mode_for(features) {
            ObservationMode::SingleFrame => &samples_single,
            ObservationMode::MultiFrame => &samples_multi,
        };
        let svm = svm_train(
            samples,
            *features,
            config.reg_c,
            config.epochs,
            config.base_seed + index as u64,
        )?;
        svms.push(svm);
    }

    Ok(FittedModels {
        noise_single,
        noise_multi,
        svms,
    })
}

/// Runs the full battery: fit once, then track and score `n_eval_seeds`
/// fresh scenarios per feature set. Every configuration sees the same
/// evaluation data.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let models = fit_models(config)?;

    let mut outcomes: Vec<ExperimentOutcome> = feature_battery()
        .iter()
        .map(|features| ExperimentOutcome {
            features: *features,
            mode: mode_for(features),
            reports: Vec::new(),
        })
        .collect();

    for repeat in 0..config.n_eval_seeds {
        let mut scenario = config.eval_scenario.clone();
        scenario.seed = config.base_seed + 1 + repeat;
        let (gt, frames) = generate(&scenario)?;

        for (outcome, svm) in outcomes.iter_mut().zip(&models.svms) {
            let tracker_config = TrackerConfig {
                dt_ref: scenario.dt(),
                stable_hits: config.stable_hits,
                max_unobserved: config.max_unobserved,
                mode: outcome.mode,
                noise: models.noise_for(outcome.mode).clone(),
                svm: svm.clone(),
                emit_tentative: config.emit_tentative,
            };
            let outputs = run_sequence(&frames, tracker_config)?;
            let report = evaluate(&gt, &outputs, config.iou_threshold)?;
            outcome.reports.push(report);
        }
    }

    Ok(ExperimentResult { outcomes })
}
