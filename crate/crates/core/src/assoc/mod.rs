//! Pairwise association costs, their SVM fusion, and minimum-cost
//! assignment between predicted tracks and new detections.

mod hungarian;
mod svm;

pub use hungarian::{hungarian, HungarianSolution};
pub use svm::{hinge_objective, svm_score, svm_train, SvmModel, SvmSample};

use crate::detection::Detection;
use crate::geometry::l2_distance;
use crate::kalman::{self, KalmanError, NoiseModel, ObservationMode};
use crate::tracker::KalmanTrack;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("cost matrix rows have unequal lengths")]
    IrregularMatrix,
    #[error("non-finite cost {0} in an admissible cell")]
    NonFiniteCost(f64),
    #[error("feature layout expects {expected} values, model carries {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("feature standardization scales must be positive")]
    InvalidScale,
    #[error("displacement feature requested but the detection has none")]
    MissingDisplacement,
    #[error("training data must contain both labels")]
    DegenerateTraining,
    #[error("non-finite feature value in training data")]
    NonFiniteFeature,
    #[error("regularization constant must be positive, got {0}")]
    InvalidRegularization(f64),
    #[error("track has an empty embedding memory")]
    EmptyEmbeddingMemory,
    #[error(transparent)]
    Kalman(#[from] KalmanError),
}

/// Which of the four association metrics enter the SVM feature vector.
/// The canonical feature order is embedding, displacement, Mahalanobis,
/// class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSet {
    pub embedding: bool,
    pub displacement: bool,
    pub mahalanobis: bool,
    pub class_cost: bool,
}

impl FeatureSet {
    pub fn all() -> Self {
        Self {
            embedding: true,
            displacement: true,
            mahalanobis: true,
            class_cost: true,
        }
    }

    pub fn dim(&self) -> usize {
        [
            self.embedding,
            self.displacement,
            self.mahalanobis,
            self.class_cost,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    /// At least one distance-bearing metric must be enabled; the class cost
    /// alone cannot discriminate.
    pub fn is_valid(&self) -> bool {
        self.embedding || self.displacement || self.mahalanobis
    }

    /// Extracts the enabled features in canonical order.
    pub fn vector(&self, f: &CostFeatures) -> Result<Vec<f64>, AssocError> {
        let mut out = Vec::with_capacity(self.dim());
        if self.embedding {
            out.push(f.embedding_dist);
        }
        if self.displacement {
            out.push(f.displacement_dist.ok_or(AssocError::MissingDisplacement)?);
        }
        if self.mahalanobis {
            out.push(f.mahalanobis_dist);
        }
        if self.class_cost {
            out.push(f.class_cost);
        }
        Ok(out)
    }
}

/// The four association metrics for one (track, detection) pair.
/// `displacement_dist` is absent when the detection carries no displacement
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFeatures {
    /// Minimum embedding distance against the track's stored embeddings.
    pub embedding_dist: f64,
    /// Distance between the track's last observed center and the
    /// detection's back-projected previous-frame center.
    pub displacement_dist: Option<f64>,
    pub mahalanobis_dist: f64,
    /// 0 if the detection's class matches the track's, else 1.
    pub class_cost: f64,
}

/// Computes the association metrics for one pair. The track state must
/// already be predicted to the detection's timestamp; `dt` is the time
/// elapsed since the previous frame and converts displacements into
/// velocity observations.
pub fn cost_features(
    track: &KalmanTrack,
    det: &Detection,
    dt: f64,
    mode: ObservationMode,
    noise: &NoiseModel,
) -> Result<CostFeatures, AssocError> {
    if track.embedding_memory.is_empty() {
        return Err(AssocError::EmptyEmbeddingMemory);
    }
    let embedding_dist = track
        .embedding_memory
        .iter()
        .map(|e| l2_distance(e.as_slice(), det.embedding.as_slice()).expect("fixed lengths"))
        .fold(f64::INFINITY, f64::min);

    let displacement_dist = det.back_projected_center().map(|(px, py)| {
        let (tx, ty) = track.last_center;
        ((tx - px) * (tx - px) + (ty - py) * (ty - py)).sqrt()
    });

    let z = kalman::detection_measurement(det, mode, dt)?;
    let mahalanobis_dist = kalman::mahalanobis(&track.state, &z, mode, noise)?;

    let class_cost = if det.class_id == track.class_id {
        0.0
    } else {
        1.0
    };

    Ok(CostFeatures {
        embedding_dist,
        displacement_dist,
        mahalanobis_dist,
        class_cost,
    })
}

/// Outcome of associating one frame of detections to the live tracks.
/// Every index appears exactly once across the three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(track index, detection index, assignment cost)` triples; the cost
    /// is the negated SVM score, so it is always negative.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Scores every pair with the SVM, forbids non-positive scores, and
/// resolves the remaining conflicts by minimum-cost assignment on the
/// negated scores.
pub fn associate(
    tracks: &[KalmanTrack],
    detections: &[Detection],
    model: &SvmModel,
    noise: &NoiseModel,
    mode: ObservationMode,
    dt: f64,
) -> Result<Assignment, AssocError> {
    let mut cost = vec![vec![None; detections.len()]; tracks.len()];
    for (ti, track) in tracks.iter().enumerate() {
        for (di, det) in detections.iter().enumerate() {
            let features = cost_features(track, det, dt, mode, noise)?;
            let score = model.score(&features)?;
            if score > 0.0 {
                cost[ti][di] = Some(-score);
            }
        }
    }
    let solution = hungarian(&cost)?;

    let mut matches = Vec::new();
    let mut matched_dets = vec![false; detections.len()];
    let mut unmatched_tracks = Vec::new();
    for (ti, assigned) in solution.row_to_col.iter().enumerate() {
        match assigned {
            Some(di) => {
                matched_dets[*di] = true;
                matches.push((ti, *di, cost[ti][*di].expect("admissible cell")));
            }
            None => unmatched_tracks.push(ti),
        }
    }
    let unmatched_detections = matched_dets
        .iter()
        .enumerate()
        .filter_map(|(di, &m)| (!m).then_some(di))
        .collect();

    Ok(Assignment {
        matches,
        unmatched_tracks,
        unmatched_detections,
    })
}
