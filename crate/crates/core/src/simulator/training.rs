//! Labeled training data for the SVM and the noise estimator, built by
//! matching detections back to the ground-truth objects they came from.

use super::{GroundTruth, SimError};
use crate::assoc::{cost_features, hungarian, SvmSample};
use crate::detection::FrameDetections;
use crate::geometry::iou;
use crate::kalman::{
    detection_measurement, predict, MeasurementSequence, NoiseModel, ObservationMode,
};
use crate::tracker::KalmanTrack;
use std::collections::BTreeMap;

/// IoU threshold for declaring a detection to be an observation of a
/// ground-truth object.
pub const ASSIGN_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct TrainingData {
    pub svm_samples: Vec<SvmSample>,
    pub residual_sequences: Vec<MeasurementSequence>,
}

/// For each frame, the detection index assigned to each ground-truth entry
/// (maximum-IoU matching at the threshold), or `None` for missed objects.
pub fn assign_detections(
    gt: &GroundTruth,
    frames: &[FrameDetections],
) -> Result<Vec<Vec<Option<usize>>>, SimError> {
    if gt.n_frames() != frames.len() {
        return Err(SimError::Config(format!(
            "{} ground-truth frames vs {} detection frames",
            gt.n_frames(),
            frames.len()
        )));
    }
    let mut out = Vec::with_capacity(frames.len());
    for (entries, frame) in gt.frames.iter().zip(frames) {
        let cost: Vec<Vec<Option<f64>>> = entries
            .iter()
            .map(|e| {
                frame
                    .detections
                    .iter()
                    .map(|d| {
                        let overlap = iou(&e.box_, &d.box_);
                        (overlap >= ASSIGN_IOU_THRESHOLD).then_some(1.0 - overlap)
                    })
                    .collect()
            })
            .collect();
        let solution = hungarian(&cost)?;
        out.push(solution.row_to_col);
    }
    Ok(out)
}

fn frame_gaps(frames: &[FrameDetections]) -> Vec<f64> {
    let mut gaps = vec![0.0; frames.len()];
    for i in 1..frames.len() {
        gaps[i] = frames[i].timestamp - frames[i - 1].timestamp;
    }
    if frames.len() > 1 {
        gaps[0] = gaps[1];
    } else {
        gaps[0] = 1.0 / 30.0;
    }
    gaps
}

/// Per-object measurement series for the noise estimator. Sequences shorter
/// than three observations are dropped.
pub fn residual_sequences(
    gt: &GroundTruth,
    frames: &[FrameDetections],
    mode: ObservationMode,
) -> Result<Vec<MeasurementSequence>, SimError> {
    let assignment = assign_detections(gt, frames)?;
    let gaps = frame_gaps(frames);

    let mut sequences: BTreeMap<u64, (Vec<Vec<f64>>, Vec<f64>, Option<f64>)> = BTreeMap::new();
    for (f, (entries, frame)) in gt.frames.iter().zip(frames).enumerate() {
        for (gi, entry) in entries.iter().enumerate() {
            let Some(di) = assignment[f][gi] else {
                continue;
            };
            let det = &frame.detections[di];
            let z = detection_measurement(det, mode, gaps[f])?;
            let slot = sequences.entry(entry.object_id).or_default();
            if let Some(last_t) = slot.2 {
                slot.1.push(frame.timestamp - last_t);
            }
            slot.0.push(z);
            slot.2 = Some(frame.timestamp);
        }
    }

    Ok(sequences
        .into_values()
        .filter(|(measurements, _, _)| measurements.len() >= 3)
        .map(|(measurements, dts, _)| MeasurementSequence { measurements, dts })
        .collect())
}

/// Labeled (track, detection) feature pairs. A ground-truth filter track is
/// run along each object's assigned detections; at every frame the pair
/// with its own next detection is a positive sample and the pairs with all
/// other detections of that frame (other objects and false positives) are
/// negatives.
pub fn svm_samples(
    gt: &GroundTruth,
    frames: &[FrameDetections],
    noise: &NoiseModel,
    mode: ObservationMode,
) -> Result<Vec<SvmSample>, SimError> {
    let assignment = assign_detections(gt, frames)?;
    let gaps = frame_gaps(frames);

    // per object: the frames where it has an assigned detection
    let mut observed: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for (f, entries) in gt.frames.iter().enumerate() {
        for (gi, entry) in entries.iter().enumerate() {
            if let Some(di) = assignment[f][gi] {
                observed.entry(entry.object_id).or_default().push((f, di));
            }
        }
    }

    let mut samples = Vec::new();
    for (object_id, hits) in &observed {
        if hits.len() < 2 {
            continue;
        }
        let (first_frame, first_det) = hits[0];
        let det = &frames[first_frame].detections[first_det];
        let mut track = KalmanTrack::from_detection(
            *object_id + 1,
            det,
            mode,
            gaps[first_frame],
            frames[first_frame].timestamp,
        )?;

        let mut next_hit = 1;
        let last_frame = hits[hits.len() - 1].0;
        for f in (first_frame + 1)..=last_frame {
            let dt = frames[f].timestamp - frames[f - 1].timestamp;
            track.state = predict(&track.state, dt, noise)?;

            let own_det = match hits.get(next_hit) {
                Some(&(hf, hd)) if hf == f => Some(hd),
                _ => None,
            };
            for (di, det) in frames[f].detections.iter().enumerate() {
                let features = cost_features(&track, det, dt, mode, noise)?;
                samples.push(SvmSample {
                    features,
                    is_match: own_det == Some(di),
                });
            }
            if let Some(di) = own_det {
                let det = &frames[f].detections[di];
                let z = detection_measurement(det, mode, dt)?;
                track.state = crate::kalman::update(&track.state, &z, mode, noise)?;
                track.class_id = det.class_id;
                track.last_center = det.box_.center();
                if track.embedding_memory.len() == crate::tracker::EMBEDDING_MEMORY {
                    track.embedding_memory.pop_front();
                }
                track.embedding_memory.push_back(det.embedding.clone());
                next_hit += 1;
            }
        }
    }
    Ok(samples)
}

/// Convenience wrapper producing both training products in one pass.
pub fn make_training_data(
    gt: &GroundTruth,
    frames: &[FrameDetections],
    noise: &NoiseModel,
    mode: ObservationMode,
) -> Result<TrainingData, SimError> {
    Ok(TrainingData {
        svm_samples: svm_samples(gt, frames, noise, mode)?,
        residual_sequences: residual_sequences(gt, frames, mode)?,
    })
}
