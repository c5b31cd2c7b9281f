//! Per-frame orchestration: predict all live tracks, associate detections,
//! update matched filters, and enforce the track lifecycle rules.
//!
//! A fresh track is tentative; it becomes stable after `stable_hits`
//! consecutive observations and is deleted once it has gone more than
//! `max_unobserved` seconds without an observation. Tentative tracks take
//! part in association exactly like stable ones; they differ only in
//! whether they are emitted.

use crate::assoc::{associate, AssocError, SvmModel};
use crate::detection::{Detection, Embedding, FrameDetections, TrackOutput, TrackStatus};
use crate::geometry::BoundingBox;
use crate::kalman::{
    self, detection_measurement, KalmanError, KalmanState, NoiseModel, ObservationMode,
};
use std::collections::VecDeque;
use thiserror::Error;

/// Number of past detection embeddings each track remembers.
pub const EMBEDDING_MEMORY: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("frame timestamp {current} does not advance past {previous}")]
    NonMonotoneTimestamp { previous: f64, current: f64 },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

/// One live track: filtered state, lifecycle bookkeeping and the appearance
/// memory used by the embedding metric.
#[derive(Debug, Clone)]
pub struct KalmanTrack {
    pub id: u64,
    pub state: KalmanState,
    pub status: TrackStatus,
    pub consecutive_hits: u32,
    /// Timestamp of the most recent associated detection, seconds.
    pub last_observed: f64,
    /// Embeddings of the most recent associated detections, oldest first.
    pub embedding_memory: VecDeque<Embedding>,
    /// Class of the most recent associated detection.
    pub class_id: u32,
    /// Center of the most recent associated detection, pixels.
    pub last_center: (f64, f64),
}

impl KalmanTrack {
    /// Spawns a track from an unassigned detection. In multi-frame mode the
    /// initial velocity comes from the displacement vector divided by `dt`;
    /// otherwise velocities start at zero.
    pub fn from_detection(
        id: u64,
        det: &Detection,
        mode: ObservationMode,
        dt: f64,
        timestamp: f64,
    ) -> Result<Self, KalmanError> {
        let z = detection_measurement(det, mode, dt)?;
        let state = kalman::initial_state_from_measurement(&z, mode)?;
        let mut embedding_memory = VecDeque::with_capacity(EMBEDDING_MEMORY);
        embedding_memory.push_back(det.embedding.clone());
        Ok(Self {
            id,
            state,
            status: TrackStatus::Tentative,
            consecutive_hits: 1,
            last_observed: timestamp,
            embedding_memory,
            class_id: det.class_id,
            last_center: det.box_.center(),
        })
    }

    fn absorb(&mut self, det: &Detection, z: &[f64], mode: ObservationMode, noise: &NoiseModel, timestamp: f64) -> Result<(), KalmanError> {
        self.state = kalman::update(&self.state, z, mode, noise)?;
        self.consecutive_hits += 1;
        if self.embedding_memory.len() == EMBEDDING_MEMORY {
            self.embedding_memory.pop_front();
        }
        self.embedding_memory.push_back(det.embedding.clone());
        self.class_id = det.class_id;
        self.last_center = det.box_.center();
        self.last_observed = timestamp;
        Ok(())
    }

    /// Current box estimate. Width and height are clamped to stay positive
    /// in case the filter drifted a size component below zero.
    pub fn current_box(&self) -> BoundingBox {
        let m = &self.state.mean;
        BoundingBox {
            cx: m[0],
            cy: m[1],
            w: m[2].max(1e-6),
            h: m[3].max(1e-6),
        }
    }
}

/// Tracker parameters; `dt_ref` is the nominal frame interval used when no
/// previous frame exists yet.
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub dt_ref: f64,
    pub stable_hits: u32,
    /// Seconds a track may go unobserved before deletion.
    pub max_unobserved: f64,
    pub mode: ObservationMode,
    pub noise: NoiseModel,
    pub svm: SvmModel,
    /// Emit tentative tracks as well as stable ones.
    pub emit_tentative: bool,
}

impl TrackerConfig {
    pub fn new(mode: ObservationMode, noise: NoiseModel, svm: SvmModel) -> Self {
        Self {
            dt_ref: noise.dt_ref,
            stable_hits: 3,
            max_unobserved: 0.5,
            mode,
            noise,
            svm,
            emit_tentative: false,
        }
    }

    fn validate(&self) -> Result<(), TrackerError> {
        if self.stable_hits < 1 {
            return Err(TrackerError::InvalidConfig(
                "stable_hits must be at least 1".into(),
            ));
        }
        if !(self.max_unobserved > 0.0) {
            return Err(TrackerError::InvalidConfig(
                "max_unobserved must be positive".into(),
            ));
        }
        if !(self.dt_ref > 0.0) {
            return Err(TrackerError::InvalidConfig(
                "dt_ref must be positive".into(),
            ));
        }
        if !self.svm.features.is_valid() {
            return Err(TrackerError::InvalidConfig(
                "feature set needs at least one distance metric".into(),
            ));
        }
        Ok(())
    }
}

pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<KalmanTrack>,
    next_id: u64,
    last_timestamp: Option<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_timestamp: None,
        })
    }

    pub fn tracks(&self) -> &[KalmanTrack] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Processes one frame and returns the boxes emitted for it.
    pub fn step(&mut self, frame: &FrameDetections) -> Result<Vec<TrackOutput>, TrackerError> {
        let dt = match self.last_timestamp {
            Some(prev) => {
                if frame.timestamp <= prev {
                    return Err(TrackerError::NonMonotoneTimestamp {
                        previous: prev,
                        current: frame.timestamp,
                    });
                }
                frame.timestamp - prev
            }
            None => self.config.dt_ref,
        };

        // 1. predict all live tracks to the frame time
        if self.last_timestamp.is_some() {
            for track in &mut self.tracks {
                track.state = kalman::predict(&track.state, dt, &self.config.noise)?;
            }
        }

        // 2. associate
        let assignment = associate(
            &self.tracks,
            &frame.detections,
            &self.config.svm,
            &self.config.noise,
            self.config.mode,
            dt,
        )?;

        // 3. update matched tracks
        for &(ti, di, _) in &assignment.matches {
            let det = &frame.detections[di];
            let z = detection_measurement(det, self.config.mode, dt)?;
            self.tracks[ti].absorb(det, &z, self.config.mode, &self.config.noise, frame.timestamp)?;
        }

        // 4. reset the hit streak of unmatched tracks
        for &ti in &assignment.unmatched_tracks {
            self.tracks[ti].consecutive_hits = 0;
        }

        // 5. spawn tentative tracks for unassigned detections
        for &di in &assignment.unmatched_detections {
            let det = &frame.detections[di];
            let track = KalmanTrack::from_detection(
                self.next_id,
                det,
                self.config.mode,
                dt,
                frame.timestamp,
            )?;
            self.next_id += 1;
            self.tracks.push(track);
        }

        // 6. promote and prune
        for track in &mut self.tracks {
            if track.consecutive_hits >= self.config.stable_hits {
                track.status = TrackStatus::Stable;
            }
        }
        let max_unobserved = self.config.max_unobserved;
        let now = frame.timestamp;
        self.tracks
            .retain(|t| now - t.last_observed <= max_unobserved);

        // 7. emit
        let mut outputs = Vec::new();
        for track in &self.tracks {
            if track.status == TrackStatus::Stable || self.config.emit_tentative {
                outputs.push(TrackOutput {
                    frame_index: frame.frame_index,
                    track_id: track.id,
                    box_: track.current_box(),
                    class_id: track.class_id,
                    status: track.status,
                });
            }
        }

        self.last_timestamp = Some(frame.timestamp);
        Ok(outputs)
    }
}

/// Runs a whole time-ordered sequence through a fresh tracker.
pub fn run_sequence(
    frames: &[FrameDetections],
    config: TrackerConfig,
) -> Result<Vec<TrackOutput>, TrackerError> {
    let mut tracker = Tracker::new(config)?;
    let mut outputs = Vec::new();
    for frame in frames {
        outputs.extend(tracker.step(frame)?);
    }
    Ok(outputs)
}
