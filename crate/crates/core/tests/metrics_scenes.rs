//! Evaluator invariances on randomized scenes.

mod common;

use common::seeded_rng;
use cuetrack::detection::{TrackOutput, TrackStatus};
use cuetrack::geometry::BoundingBox;
use cuetrack::metrics::evaluate;
use cuetrack::simulator::{GroundTruth, GtEntry};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Random ground truth plus a sloppy hypothesis set derived from it:
/// perturbed boxes, dropped frames, occasional id churn and spurious boxes.
fn random_scene(rng: &mut ChaCha8Rng) -> (GroundTruth, Vec<TrackOutput>) {
    let n_frames = rng.random_range(5..25);
    let n_objects = rng.random_range(1..6);
    let mut gt = GroundTruth {
        frames: Vec::with_capacity(n_frames),
    };
    let mut hyps = Vec::new();

    let mut centers: Vec<(f64, f64)> = (0..n_objects)
        .map(|_| (rng.random_range(50.0..600.0), rng.random_range(50.0..400.0)))
        .collect();
    let velocities: Vec<(f64, f64)> = (0..n_objects)
        .map(|_| (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)))
        .collect();
    let mut hyp_ids: Vec<u64> = (0..n_objects as u64).map(|i| i + 1).collect();
    let mut next_id = n_objects as u64 + 1;

    for f in 0..n_frames {
        let mut entries = Vec::new();
        for (obj, center) in centers.iter_mut().enumerate() {
            center.0 += velocities[obj].0;
            center.1 += velocities[obj].1;
            entries.push(GtEntry {
                object_id: obj as u64,
                box_: BoundingBox::new(center.0, center.1, 24.0, 24.0).unwrap(),
                class_id: 0,
            });
            // id churn with small probability
            if rng.random_bool(0.05) {
                hyp_ids[obj] = next_id;
                next_id += 1;
            }
            if rng.random_bool(0.8) {
                hyps.push(TrackOutput {
                    frame_index: f as u64,
                    track_id: hyp_ids[obj],
                    box_: BoundingBox::new(
                        center.0 + rng.random_range(-3.0..3.0),
                        center.1 + rng.random_range(-3.0..3.0),
                        24.0,
                        24.0,
                    )
                    .unwrap(),
                    class_id: 0,
                    status: TrackStatus::Stable,
                });
            }
        }
        // spurious boxes
        if rng.random_bool(0.3) {
            hyps.push(TrackOutput {
                frame_index: f as u64,
                track_id: next_id,
                box_: BoundingBox::new(
                    rng.random_range(30.0..700.0),
                    rng.random_range(30.0..450.0),
                    24.0,
                    24.0,
                )
                .unwrap(),
                class_id: 0,
                status: TrackStatus::Stable,
            });
            next_id += 1;
        }
        gt.frames.push(entries);
    }
    (gt, hyps)
}

#[test]
fn consistent_id_renaming_leaves_reports_unchanged() {
    let mut rng = seeded_rng(2024);
    for _ in 0..100 {
        let (gt, hyps) = random_scene(&mut rng);
        let base = evaluate(&gt, &hyps, 0.5).unwrap();

        // global permutation of hypothesis ids
        let mut ids: Vec<u64> = hyps.iter().map(|h| h.track_id).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng);
        let mapping: BTreeMap<u64, u64> = ids.into_iter().zip(shuffled).collect();

        let renamed: Vec<TrackOutput> = hyps
            .iter()
            .map(|h| TrackOutput {
                track_id: mapping[&h.track_id],
                ..h.clone()
            })
            .collect();
        let permuted = evaluate(&gt, &renamed, 0.5).unwrap();
        assert_eq!(base, permuted);
    }
}

#[test]
fn motp_invariant_under_input_reordering() {
    let mut rng = seeded_rng(515);
    for _ in 0..50 {
        let (gt, mut hyps) = random_scene(&mut rng);
        let base = evaluate(&gt, &hyps, 0.5).unwrap();
        hyps.shuffle(&mut rng);
        let shuffled = evaluate(&gt, &hyps, 0.5).unwrap();
        assert!(
            (base.motp - shuffled.motp).abs() <= 1e-12,
            "{} vs {}",
            base.motp,
            shuffled.motp
        );
        assert_eq!(base.counts.matches, shuffled.counts.matches);
        assert_eq!(base.counts.misses, shuffled.counts.misses);
        assert_eq!(base.counts.false_positives, shuffled.counts.false_positives);
    }
}
