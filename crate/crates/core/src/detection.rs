//! Detector output records and the per-frame containers moved through the
//! tracking pipeline.

use crate::geometry::BoundingBox;
use thiserror::Error;

/// Length of the appearance embedding attached to every detection.
pub const EMBEDDING_DIM: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("embedding must have exactly {EMBEDDING_DIM} components, got {0}")]
    BadEmbeddingLength(usize),
    #[error("score {name} = {value} outside [0, 1]")]
    ScoreOutOfRange { name: &'static str, value: f64 },
}

/// Appearance descriptor of a detection. Same-object embeddings cluster
/// tightly while different-object embeddings are pushed apart, so the
/// pairwise distance carries identity information.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub [f64; EMBEDDING_DIM]);

impl Embedding {
    pub fn from_slice(values: &[f64]) -> Result<Self, DetectionError> {
        let arr: [f64; EMBEDDING_DIM] = values
            .try_into()
            .map_err(|_| DetectionError::BadEmbeddingLength(values.len()))?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One detector output: a box, scores, the appearance embedding and, when
/// the detector saw two consecutive frames, a displacement vector pointing
/// from the current box center back to where that center was one frame ago.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub box_: BoundingBox,
    pub objectness: f64,
    pub class_id: u32,
    pub class_score: f64,
    pub embedding: Embedding,
    /// `(dx, dy)` such that previous-frame center = current center + (dx, dy).
    pub displacement: Option<(f64, f64)>,
}

impl Detection {
    pub fn validate(&self) -> Result<(), DetectionError> {
        for (name, value) in [
            ("objectness", self.objectness),
            ("class_score", self.class_score),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DetectionError::ScoreOutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// Center of the box in the previous frame implied by the displacement.
    pub fn back_projected_center(&self) -> Option<(f64, f64)> {
        self.displacement
            .map(|(dx, dy)| (self.box_.cx + dx, self.box_.cy + dy))
    }
}

/// All detections of one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_index: u64,
    /// Seconds; strictly increasing across a sequence.
    pub timestamp: f64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Stable,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Stable => "stable",
        }
    }
}

/// One emitted track box. Track ids are never reused within a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub frame_index: u64,
    pub track_id: u64,
    pub box_: BoundingBox,
    pub class_id: u32,
    pub status: TrackStatus,
}
