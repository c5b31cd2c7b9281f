//! CLEAR MOT bookkeeping: frame-by-frame correspondences with persistence,
//! miss / false-positive / mismatch counting, and the derived MOTA, MOTP
//! and mostly/partially-tracked statistics.

use crate::assoc::{hungarian, AssocError};
use crate::detection::TrackOutput;
use crate::geometry::iou;
use crate::simulator::GroundTruth;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("hypothesis frame {frame} outside the ground-truth range of {n_frames} frames")]
    FrameOutOfRange { frame: u64, n_frames: usize },
    #[error("iou threshold {0} must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

/// Raw event counts over a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotCounts {
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub matches: u64,
    pub total_gt: u64,
}

/// Sequence-level report. `motp` is the mean matched-pair distance
/// (1 - IoU, lower is better); the ratios are counts divided by the number
/// of ground-truth boxes, and `mota = 1 - (r_m + r_fp + r_mme)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotReport {
    pub motp: f64,
    pub mota: f64,
    pub r_m: f64,
    pub r_fp: f64,
    pub r_mme: f64,
    /// Percentage of objects matched in at least 80% of their frames.
    pub mostly_tracked: f64,
    pub partially_tracked: f64,
    /// Percentage of objects matched in less than 20% of their frames.
    pub mostly_lost: f64,
    pub counts: MotCounts,
}

/// Evaluates tracker output against the ground truth. Correspondences from
/// the previous frame persist while their IoU stays at or above the
/// threshold; the remaining boxes are matched by minimum total `1 - IoU`
/// among pairs above the threshold, and a matched object whose hypothesis
/// id changed since it was last matched counts one mismatch.
pub fn evaluate(
    gt: &GroundTruth,
    hypotheses: &[TrackOutput],
    iou_threshold: f64,
) -> Result<MotReport, MetricsError> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(MetricsError::InvalidThreshold(iou_threshold));
    }
    let n_frames = gt.n_frames();
    let mut hyp_by_frame: Vec<Vec<&TrackOutput>> = vec![Vec::new(); n_frames];
    for h in hypotheses {
        let f = h.frame_index as usize;
        if f >= n_frames {
            return Err(MetricsError::FrameOutOfRange {
                frame: h.frame_index,
                n_frames,
            });
        }
        hyp_by_frame[f].push(h);
    }

    let mut counts = MotCounts::default();
    let mut distance_sum = 0.0;
    // correspondence established in the previous frame: object -> track id
    let mut prev_corr: BTreeMap<u64, u64> = BTreeMap::new();
    // last hypothesis id each object was ever matched to
    let mut last_matched: BTreeMap<u64, u64> = BTreeMap::new();
    // per object: (frames present, frames matched)
    let mut presence: BTreeMap<u64, (u64, u64)> = BTreeMap::new();

    for (f, entries) in gt.frames.iter().enumerate() {
        let hyps = &hyp_by_frame[f];
        let mut gt_matched: Vec<Option<u64>> = vec![None; entries.len()];
        let mut hyp_used: Vec<bool> = vec![false; hyps.len()];

        counts.total_gt += entries.len() as u64;
        for e in entries {
            presence.entry(e.object_id).or_insert((0, 0)).0 += 1;
        }

        // 1. persistence pass
        for (gi, e) in entries.iter().enumerate() {
            let Some(&track_id) = prev_corr.get(&e.object_id) else {
                continue;
            };
            let Some(hi) = hyps
                .iter()
                .enumerate()
                .find(|(i, h)| h.track_id == track_id && !hyp_used[*i])
                .map(|(i, _)| i)
            else {
                continue;
            };
            let overlap = iou(&e.box_, &hyps[hi].box_);
            if overlap >= iou_threshold {
                gt_matched[gi] = Some(track_id);
                hyp_used[hi] = true;
                distance_sum += 1.0 - overlap;
            }
        }

        // 2. minimum-distance assignment for everything else
        let free_gt: Vec<usize> = (0..entries.len()).filter(|&g| gt_matched[g].is_none()).collect();
        let free_hyp: Vec<usize> = (0..hyps.len()).filter(|&h| !hyp_used[h]).collect();
        if !free_gt.is_empty() && !free_hyp.is_empty() {
            let cost: Vec<Vec<Option<f64>>> = free_gt
                .iter()
                .map(|&g| {
                    free_hyp
                        .iter()
                        .map(|&h| {
                            let overlap = iou(&entries[g].box_, &hyps[h].box_);
                            (overlap >= iou_threshold).then_some(1.0 - overlap)
                        })
                        .collect()
                })
                .collect();
            let solution = hungarian(&cost)?;
            for (row, assigned) in solution.row_to_col.iter().enumerate() {
                if let Some(col) = assigned {
                    let g = free_gt[row];
                    let h = free_hyp[*col];
                    gt_matched[g] = Some(hyps[h].track_id);
                    hyp_used[h] = true;
                    distance_sum += cost[row][*col].expect("admissible");
                }
            }
        }

        // 3. bookkeeping
        let mut new_corr = BTreeMap::new();
        for (gi, e) in entries.iter().enumerate() {
            match gt_matched[gi] {
                Some(track_id) => {
                    counts.matches += 1;
                    presence.get_mut(&e.object_id).expect("inserted above").1 += 1;
                    if let Some(&prev_id) = last_matched.get(&e.object_id) {
                        if prev_id != track_id {
                            counts.mismatches += 1;
                        }
                    }
                    last_matched.insert(e.object_id, track_id);
                    new_corr.insert(e.object_id, track_id);
                }
                None => counts.misses += 1,
            }
        }
        counts.false_positives += hyp_used.iter().filter(|&&u| !u).count() as u64;
        prev_corr = new_corr;
    }

    let total = counts.total_gt as f64;
    let (r_m, r_fp, r_mme, mota) = if counts.total_gt > 0 {
        let r_m = counts.misses as f64 / total;
        let r_fp = counts.false_positives as f64 / total;
        let r_mme = counts.mismatches as f64 / total;
        (r_m, r_fp, r_mme, 1.0 - (r_m + r_fp + r_mme))
    } else {
        (0.0, 0.0, 0.0, 1.0)
    };
    let motp = if counts.matches > 0 {
        distance_sum / counts.matches as f64
    } else {
        0.0
    };

    let n_objects = presence.len();
    let (mut mt, mut pt, mut ml) = (0usize, 0usize, 0usize);
    for &(present, matched) in presence.values() {
        let ratio = matched as f64 / present as f64;
        if ratio >= 0.8 {
            mt += 1;
        } else if ratio < 0.2 {
            ml += 1;
        } else {
            pt += 1;
        }
    }
    let pct = |c: usize| {
        if n_objects > 0 {
            100.0 * c as f64 / n_objects as f64
        } else {
            0.0
        }
    };

    Ok(MotReport {
        motp,
        mota,
        r_m,
        r_fp,
        r_mme,
        mostly_tracked: pct(mt),
        partially_tracked: pct(pt),
        mostly_lost: pct(ml),
        counts,
    })
}
