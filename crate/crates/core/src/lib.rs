//! Online multi-object tracking by detection.
//!
//! The pipeline links per-frame detections into identities with a
//! constant-velocity Kalman filter, four pairwise association metrics
//! (appearance embedding distance, displacement back-projection distance,
//! Mahalanobis distance and a class cost) fused by a linear SVM, and
//! Hungarian assignment over the fused costs. Track lifecycle follows a
//! simple heuristic: tracks stabilize after three consecutive observations
//! and are deleted after half a second without one.
//!
//! The crate also ships a deterministic scene simulator that stands in for
//! a detector network, training-data extraction for the SVM and the noise
//! estimator, a CLEAR MOT evaluator, and the feature-ablation experiment
//! battery built from all of the above.

pub mod assoc;
pub mod detection;
pub mod experiment;
pub mod geometry;
pub mod kalman;
pub mod metrics;
pub mod simulator;
pub mod tracker;

pub use assoc::{
    associate, cost_features, hungarian, svm_score, svm_train, Assignment, AssocError,
    CostFeatures, FeatureSet, SvmModel, SvmSample,
};
pub use detection::{
    Detection, DetectionError, Embedding, FrameDetections, TrackOutput, TrackStatus,
    EMBEDDING_DIM,
};
pub use geometry::{iou, l2_distance, BoundingBox, GeometryError};
pub use kalman::{
    estimate_noise, mahalanobis, predict, transition_matrix, update, KalmanError, KalmanState,
    MeasurementSequence, NoiseEstimationOptions, NoiseModel, ObservationMode,
};
pub use metrics::{evaluate, MetricsError, MotCounts, MotReport};
pub use simulator::{
    generate, make_training_data, GroundTruth, GtEntry, ScenarioConfig, SimError, TrainingData,
};
pub use tracker::{run_sequence, KalmanTrack, Tracker, TrackerConfig, TrackerError};
