//! Deterministic synthetic-scene generator. Objects follow noisy
//! constant-velocity trajectories inside the image (reflecting at the
//! borders), the detector is modeled by box corner noise, misses, class
//! confusion and Poisson false positives, and every detection carries an
//! embedding built around a per-object anchor so the margin geometry of the
//! appearance feature holds by construction.

mod training;

pub use training::{
    assign_detections, make_training_data, residual_sequences, svm_samples, TrainingData,
};

use crate::detection::{Detection, Embedding, FrameDetections, EMBEDDING_DIM};
use crate::geometry::BoundingBox;
use crate::kalman::{MeasurementSequence, ObservationMode};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("could not place {requested} anchors at separation {separation} within {attempts} attempts")]
    AnchorPlacement {
        requested: usize,
        separation: f64,
        attempts: usize,
    },
    #[error(transparent)]
    Kalman(#[from] crate::kalman::KalmanError),
    #[error(transparent)]
    Assoc(#[from] crate::assoc::AssocError),
}

/// Scene and detector-noise parameters. Everything is deterministic given
/// `seed`.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub fps: f64,
    /// (width, height) in pixels.
    pub image_size: (f64, f64),
    pub n_objects: usize,
    /// Per-object `(birth, death)` frame ranges, birth inclusive and death
    /// exclusive; `None` keeps every object alive for the whole sequence.
    pub object_lifespans: Option<Vec<(usize, usize)>>,
    /// Std of the per-frame velocity perturbation, px/s.
    pub process_sigma: f64,
    /// Std of the box corner noise, px.
    pub measurement_sigma: f64,
    pub miss_prob: f64,
    /// Expected false positives per frame (Poisson).
    pub fp_rate: f64,
    pub n_classes: u32,
    pub class_confusion_prob: f64,
    /// Embedding distance threshold between same-object and
    /// different-object pairs.
    pub embedding_beta: f64,
    /// Margin around the threshold.
    pub embedding_alpha: f64,
    /// Per-component std of the embedding noise.
    pub embedding_noise_sigma: f64,
    /// Std of the displacement vector noise, px.
    pub displacement_noise_sigma: f64,
    /// (min, max) box side length, px.
    pub box_size_range: (f64, f64),
    /// Maximum initial per-axis speed, px/s.
    pub init_speed: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 300,
            fps: 30.0,
            image_size: (1280.0, 720.0),
            n_objects: 2,
            object_lifespans: None,
            process_sigma: 3.0,
            measurement_sigma: 1.0,
            miss_prob: 0.1,
            fp_rate: 0.2,
            n_classes: 3,
            class_confusion_prob: 0.05,
            embedding_beta: 1.0,
            embedding_alpha: 0.6,
            embedding_noise_sigma: 0.005,
            displacement_noise_sigma: 0.5,
            box_size_range: (40.0, 90.0),
            init_speed: 120.0,
        }
    }
}

impl ScenarioConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError::Config(msg));
        if self.n_frames == 0 {
            return err("n_frames must be positive".into());
        }
        if !(self.fps > 0.0) {
            return err("fps must be positive".into());
        }
        if !(self.image_size.0 > 0.0 && self.image_size.1 > 0.0) {
            return err("image size must be positive".into());
        }
        for (name, p) in [
            ("miss_prob", self.miss_prob),
            ("class_confusion_prob", self.class_confusion_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} = {p} outside [0, 1]"));
            }
        }
        for (name, s) in [
            ("process_sigma", self.process_sigma),
            ("measurement_sigma", self.measurement_sigma),
            ("embedding_noise_sigma", self.embedding_noise_sigma),
            ("displacement_noise_sigma", self.displacement_noise_sigma),
            ("fp_rate", self.fp_rate),
        ] {
            if !(s >= 0.0) {
                return err(format!("{name} = {s} must be non-negative"));
            }
        }
        if self.n_classes == 0 {
            return err("n_classes must be at least 1".into());
        }
        if !(self.embedding_alpha > 0.0 && self.embedding_alpha < self.embedding_beta) {
            return err(format!(
                "need 0 < alpha < beta, got alpha = {}, beta = {}",
                self.embedding_alpha, self.embedding_beta
            ));
        }
        // The per-detection spread around an anchor is bounded by
        // (beta - alpha)/2 plus the truncated noise, so same-object pairs
        // stay below (beta - alpha) + 2 * (3 * sigma * sqrt(32)). The noise
        // slack must keep that bound below beta.
        let slack = embedding_noise_bound(self.embedding_noise_sigma);
        if 2.0 * slack >= self.embedding_alpha {
            return err(format!(
                "embedding noise slack 2*{slack:.4} exceeds the margin alpha = {}",
                self.embedding_alpha
            ));
        }
        if slack >= (self.embedding_beta - self.embedding_alpha) / 2.0 {
            return err(format!(
                "embedding noise slack {slack:.4} exceeds (beta - alpha)/2 = {}",
                (self.embedding_beta - self.embedding_alpha) / 2.0
            ));
        }
        let (min_s, max_s) = self.box_size_range;
        if !(min_s > 0.0 && max_s >= min_s) {
            return err("box_size_range must satisfy 0 < min <= max".into());
        }
        if max_s >= self.image_size.0 || max_s >= self.image_size.1 {
            return err("boxes must fit inside the image".into());
        }
        if !(self.init_speed >= 0.0) {
            return err("init_speed must be non-negative".into());
        }
        if let Some(spans) = &self.object_lifespans {
            if spans.len() != self.n_objects {
                return err(format!(
                    "{} lifespans for {} objects",
                    spans.len(),
                    self.n_objects
                ));
            }
            for &(birth, death) in spans {
                if birth >= death || death > self.n_frames {
                    return err(format!("invalid lifespan ({birth}, {death})"));
                }
            }
        }
        Ok(())
    }
}

/// Hard bound applied to sampled embedding noise vectors.
fn embedding_noise_bound(sigma: f64) -> f64 {
    3.0 * sigma * (EMBEDDING_DIM as f64).sqrt()
}

/// Ground-truth box of one object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEntry {
    pub object_id: u64,
    pub box_: BoundingBox,
    pub class_id: u32,
}

/// Per-frame ground truth. Ids are stable over an object's lifespan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub frames: Vec<Vec<GtEntry>>,
}

impl GroundTruth {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn total_boxes(&self) -> usize {
        self.frames.iter().map(|f| f.len()).sum()
    }
}

struct SimObject {
    class_id: u32,
    anchor: [f64; EMBEDDING_DIM],
    birth: usize,
    death: usize,
    w: f64,
    h: f64,
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    prev_center: Option<(f64, f64)>,
}

fn sample_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        0.0
    }
}

fn sample_sphere(rng: &mut ChaCha8Rng, radius: f64) -> [f64; EMBEDDING_DIM] {
    loop {
        let mut v = [0.0; EMBEDDING_DIM];
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut norm_sq = 0.0f64;
        for x in &mut v {
            *x = normal.sample(rng);
            norm_sq += *x * *x;
        }
        let norm = norm_sq.sqrt();
        if norm > 1e-9 {
            for x in &mut v {
                *x *= radius / norm;
            }
            return v;
        }
    }
}

/// Detection embedding for one object: the anchor plus a per-detection
/// viewpoint offset of norm below `(beta - alpha) / 2` plus truncated
/// Gaussian noise. Every sample therefore stays within `beta - alpha` of
/// its anchor, and same-object pairs stay below
/// `(beta - alpha) + 2 * (3 * sigma * sqrt(32))`.
fn embedding_near(
    rng: &mut ChaCha8Rng,
    anchor: &[f64; EMBEDDING_DIM],
    spread_radius: f64,
    sigma: f64,
) -> Embedding {
    let mut e = *anchor;
    if spread_radius > 0.0 {
        // uniform in the ball of the spread radius
        let radius = spread_radius * rng.random::<f64>().powf(1.0 / EMBEDDING_DIM as f64);
        let offset = sample_sphere(rng, radius);
        for (slot, o) in e.iter_mut().zip(&offset) {
            *slot += o;
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut noise = [0.0; EMBEDDING_DIM];
        let mut norm_sq = 0.0f64;
        for n in &mut noise {
            *n = normal.sample(rng);
            norm_sq += *n * *n;
        }
        let norm = norm_sq.sqrt();
        let bound = embedding_noise_bound(sigma);
        let scale = if norm > bound { bound / norm } else { 1.0 };
        for (slot, n) in e.iter_mut().zip(&noise) {
            *slot += n * scale;
        }
    }
    Embedding(e)
}

const ANCHOR_ATTEMPTS: usize = 10_000;

fn place_anchors(
    rng: &mut ChaCha8Rng,
    n: usize,
    beta: f64,
    alpha: f64,
) -> Result<Vec<[f64; EMBEDDING_DIM]>, SimError> {
    let radius = beta + alpha;
    let separation = beta + alpha;
    let mut anchors: Vec<[f64; EMBEDDING_DIM]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while anchors.len() < n {
        if attempts >= ANCHOR_ATTEMPTS {
            return Err(SimError::AnchorPlacement {
                requested: n,
                separation,
                attempts: ANCHOR_ATTEMPTS,
            });
        }
        attempts += 1;
        let candidate = sample_sphere(rng, radius);
        let ok = anchors.iter().all(|a| {
            let d: f64 = a
                .iter()
                .zip(&candidate)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            d >= separation
        });
        if ok {
            anchors.push(candidate);
        }
    }
    Ok(anchors)
}

/// Generates the ground truth and the noisy detection stream for one
/// scenario.
pub fn generate(config: &ScenarioConfig) -> Result<(GroundTruth, Vec<FrameDetections>), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (width, height) = config.image_size;
    let dt = config.dt();

    let anchors = place_anchors(
        &mut rng,
        config.n_objects,
        config.embedding_beta,
        config.embedding_alpha,
    )?;

    let mut objects: Vec<SimObject> = Vec::with_capacity(config.n_objects);
    for i in 0..config.n_objects {
        let (birth, death) = config
            .object_lifespans
            .as_ref()
            .map_or((0, config.n_frames), |spans| spans[i]);
        let (min_s, max_s) = config.box_size_range;
        let w = if max_s > min_s {
            rng.random_range(min_s..max_s)
        } else {
            min_s
        };
        let h = if max_s > min_s {
            rng.random_range(min_s..max_s)
        } else {
            min_s
        };
        let cx = rng.random_range(w / 2.0..width - w / 2.0);
        let cy = rng.random_range(h / 2.0..height - h / 2.0);
        let speed = config.init_speed;
        let (vx, vy) = if speed > 0.0 {
            (
                rng.random_range(-speed..speed),
                rng.random_range(-speed..speed),
            )
        } else {
            (0.0, 0.0)
        };
        objects.push(SimObject {
            class_id: rng.random_range(0..config.n_classes),
            anchor: anchors[i],
            birth,
            death,
            w,
            h,
            cx,
            cy,
            vx,
            vy,
            prev_center: None,
        });
    }

    let mut gt = GroundTruth {
        frames: Vec::with_capacity(config.n_frames),
    };
    let mut frames = Vec::with_capacity(config.n_frames);

    for f in 0..config.n_frames {
        let timestamp = f as f64 / config.fps;
        let mut entries = Vec::new();
        let mut detections = Vec::new();

        for (i, obj) in objects.iter().enumerate() {
            if f < obj.birth || f >= obj.death {
                continue;
            }
            let gt_box = BoundingBox {
                cx: obj.cx,
                cy: obj.cy,
                w: obj.w,
                h: obj.h,
            };
            entries.push(GtEntry {
                object_id: i as u64,
                box_: gt_box,
                class_id: obj.class_id,
            });

            if rng.random_bool(config.miss_prob) {
                continue;
            }
            // independent Gaussian noise on each corner, expressed as
            // center/size deltas so the noiseless limit is exact
            let n_l = sample_normal(&mut rng, config.measurement_sigma);
            let n_t = sample_normal(&mut rng, config.measurement_sigma);
            let n_r = sample_normal(&mut rng, config.measurement_sigma);
            let n_b = sample_normal(&mut rng, config.measurement_sigma);
            let box_ = BoundingBox {
                cx: obj.cx + (n_l + n_r) / 2.0,
                cy: obj.cy + (n_t + n_b) / 2.0,
                w: (obj.w + (n_r - n_l)).max(0.5),
                h: (obj.h + (n_b - n_t)).max(0.5),
            };

            let mut class_id = obj.class_id;
            if config.n_classes > 1 && rng.random_bool(config.class_confusion_prob) {
                let offset = rng.random_range(1..config.n_classes);
                class_id = (obj.class_id + offset) % config.n_classes;
            }

            let spread = (config.embedding_beta - config.embedding_alpha) / 2.0;
            let embedding =
                embedding_near(&mut rng, &obj.anchor, spread, config.embedding_noise_sigma);

            let true_delta = match obj.prev_center {
                Some((px, py)) => (px - obj.cx, py - obj.cy),
                None => (0.0, 0.0),
            };
            let displacement = Some((
                true_delta.0 + sample_normal(&mut rng, config.displacement_noise_sigma),
                true_delta.1 + sample_normal(&mut rng, config.displacement_noise_sigma),
            ));

            detections.push(Detection {
                box_,
                objectness: rng.random_range(0.7..1.0),
                class_id,
                class_score: rng.random_range(0.6..1.0),
                embedding,
                displacement,
            });
        }

        // false positives
        let n_fp = if config.fp_rate > 0.0 {
            Poisson::new(config.fp_rate).unwrap().sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..n_fp {
            let (min_s, max_s) = config.box_size_range;
            let w = if max_s > min_s {
                rng.random_range(min_s..max_s)
            } else {
                min_s
            };
            let h = if max_s > min_s {
                rng.random_range(min_s..max_s)
            } else {
                min_s
            };
            let cx = rng.random_range(w / 2.0..width - w / 2.0);
            let cy = rng.random_range(h / 2.0..height - h / 2.0);
            // far from every anchor: anchors live on the sphere of radius
            // beta + alpha, so a point at twice that radius keeps at least
            // beta + alpha distance to all of them
            let far = sample_sphere(&mut rng, 2.0 * (config.embedding_beta + config.embedding_alpha));
            detections.push(Detection {
                box_: BoundingBox { cx, cy, w, h },
                objectness: rng.random_range(0.3..0.8),
                class_id: rng.random_range(0..config.n_classes),
                class_score: rng.random_range(0.3..0.9),
                embedding: Embedding(far),
                displacement: Some((
                    sample_normal(&mut rng, config.displacement_noise_sigma),
                    sample_normal(&mut rng, config.displacement_noise_sigma),
                )),
            });
        }

        gt.frames.push(entries);
        frames.push(FrameDetections {
            frame_index: f as u64,
            timestamp,
            detections,
        });

        // advance dynamics to the next frame
        for obj in objects.iter_mut() {
            if f < obj.birth || f >= obj.death {
                continue;
            }
            obj.prev_center = Some((obj.cx, obj.cy));
            obj.cx += obj.vx * dt;
            obj.cy += obj.vy * dt;
            obj.vx += sample_normal(&mut rng, config.process_sigma);
            obj.vy += sample_normal(&mut rng, config.process_sigma);

            // reflect at the borders so boxes stay inside the image
            let (min_x, max_x) = (obj.w / 2.0, width - obj.w / 2.0);
            let (min_y, max_y) = (obj.h / 2.0, height - obj.h / 2.0);
            if obj.cx < min_x {
                obj.cx = 2.0 * min_x - obj.cx;
                obj.vx = -obj.vx;
            } else if obj.cx > max_x {
                obj.cx = 2.0 * max_x - obj.cx;
                obj.vx = -obj.vx;
            }
            if obj.cy < min_y {
                obj.cy = 2.0 * min_y - obj.cy;
                obj.vy = -obj.vy;
            } else if obj.cy > max_y {
                obj.cy = 2.0 * max_y - obj.cy;
                obj.vy = -obj.vy;
            }
            obj.cx = obj.cx.clamp(min_x, max_x);
            obj.cy = obj.cy.clamp(min_y, max_y);
        }
    }

    Ok((gt, frames))
}

/// Samples measurement sequences from the exact linear-Gaussian
/// constant-velocity model with diagonal process noise `q_diag` (per
/// nominal step) and observation noise `r_diag`. This is the ground-truth
/// generator for the noise-estimation oracle.
pub fn sample_kalman_sequences(
    n_tracks: usize,
    n_frames: usize,
    fps: f64,
    q_diag: [f64; 8],
    r_diag: &[f64],
    mode: ObservationMode,
    seed: u64,
) -> Vec<MeasurementSequence> {
    assert_eq!(r_diag.len(), mode.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / fps;
    let q_std: Vec<f64> = q_diag.iter().map(|q| q.sqrt()).collect();
    let r_std: Vec<f64> = r_diag.iter().map(|r| r.sqrt()).collect();

    (0..n_tracks)
        .map(|_| {
            let mut state = [
                rng.random_range(100.0..900.0),
                rng.random_range(100.0..600.0),
                rng.random_range(20.0..100.0),
                rng.random_range(20.0..100.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let mut measurements = Vec::with_capacity(n_frames);
            for frame in 0..n_frames {
                if frame > 0 {
                    for i in 0..4 {
                        state[i] += dt * state[i + 4];
                    }
                    for i in 0..8 {
                        state[i] += sample_normal(&mut rng, q_std[i]);
                    }
                }
                let z: Vec<f64> = (0..mode.dim())
                    .map(|i| state[i] + sample_normal(&mut rng, r_std[i]))
                    .collect();
                measurements.push(z);
            }
            MeasurementSequence {
                measurements,
                dts: vec![dt; n_frames - 1],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::l2_distance;

    #[test]
    fn same_seed_is_bit_identical() {
        let config = ScenarioConfig::default();
        let (gt_a, det_a) = generate(&config).unwrap();
        let (gt_b, det_b) = generate(&config).unwrap();
        assert_eq!(gt_a, gt_b);
        assert_eq!(det_a, det_b);
    }

    #[test]
    fn noiseless_detections_match_ground_truth() {
        let config = ScenarioConfig {
            measurement_sigma: 0.0,
            miss_prob: 0.0,
            fp_rate: 0.0,
            embedding_noise_sigma: 0.0,
            class_confusion_prob: 0.0,
            displacement_noise_sigma: 0.0,
            n_frames: 50,
            ..ScenarioConfig::default()
        };
        let (gt, frames) = generate(&config).unwrap();
        for (entries, frame) in gt.frames.iter().zip(&frames) {
            assert_eq!(entries.len(), frame.detections.len());
            for (e, d) in entries.iter().zip(&frame.detections) {
                assert_eq!(e.box_, d.box_);
                assert_eq!(e.class_id, d.class_id);
            }
        }
    }

    #[test]
    fn boxes_stay_inside_image() {
        let config = ScenarioConfig {
            n_frames: 600,
            n_objects: 6,
            init_speed: 400.0,
            process_sigma: 10.0,
            ..ScenarioConfig::default()
        };
        let (gt, _) = generate(&config).unwrap();
        let (w, h) = config.image_size;
        for frame in &gt.frames {
            for e in frame {
                let (l, t, r, b) = e.box_.corners();
                assert!(l >= -1e-9 && t >= -1e-9 && r <= w + 1e-9 && b <= h + 1e-9);
            }
        }
    }

    #[test]
    fn miss_fraction_concentrates() {
        let config = ScenarioConfig {
            miss_prob: 0.2,
            fp_rate: 0.0,
            n_frames: 1000,
            n_objects: 10,
            ..ScenarioConfig::default()
        };
        let (gt, frames) = generate(&config).unwrap();
        let total = gt.total_boxes() as f64;
        assert!(total >= 10_000.0);
        let detected: usize = frames.iter().map(|f| f.detections.len()).sum();
        let missed = (total - detected as f64) / total;
        assert!((0.18..=0.22).contains(&missed), "miss fraction {missed}");
    }

    #[test]
    fn embedding_geometry_separates_objects() {
        // With the default margin (alpha close enough to beta) the anchor
        // separation dominates the per-detection spread, so same-object
        // pairs stay below beta and cross-object pairs above it.
        let config = ScenarioConfig {
            n_frames: 120,
            n_objects: 8,
            miss_prob: 0.0,
            fp_rate: 0.0,
            ..ScenarioConfig::default()
        };
        let spread = (config.embedding_beta - config.embedding_alpha) / 2.0
            + 3.0 * config.embedding_noise_sigma * (EMBEDDING_DIM as f64).sqrt();
        assert!(
            config.embedding_beta + config.embedding_alpha - 2.0 * spread
                > config.embedding_beta,
            "default config must keep the cross-object floor above beta"
        );
        let (gt, frames) = generate(&config).unwrap();
        // collect embeddings per object via the aligned noiseless ordering
        let mut by_object: std::collections::BTreeMap<u64, Vec<&Embedding>> = Default::default();
        for (entries, frame) in gt.frames.iter().zip(&frames) {
            for (e, d) in entries.iter().zip(&frame.detections) {
                by_object.entry(e.object_id).or_default().push(&d.embedding);
            }
        }
        let beta = config.embedding_beta;
        let ids: Vec<u64> = by_object.keys().copied().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i..] {
                let ea = &by_object[a];
                let eb = &by_object[b];
                for (k, x) in ea.iter().enumerate().step_by(7) {
                    for y in eb.iter().skip(k % 3).step_by(11) {
                        let d = l2_distance(x.as_slice(), y.as_slice()).unwrap();
                        if a == b {
                            assert!(d < beta, "same-object distance {d} >= beta");
                        } else {
                            assert!(d > beta, "cross-object distance {d} <= beta");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn anchor_placement_can_fail() {
        let config = ScenarioConfig {
            n_objects: 5000,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            generate(&config),
            Err(SimError::AnchorPlacement { .. })
        ));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_alpha = ScenarioConfig {
            embedding_alpha: 1.5,
            ..ScenarioConfig::default()
        };
        assert!(generate(&bad_alpha).is_err());
        let noisy_embeddings = ScenarioConfig {
            embedding_noise_sigma: 0.1,
            ..ScenarioConfig::default()
        };
        assert!(matches!(generate(&noisy_embeddings), Err(SimError::Config(_))));
        let bad_span = ScenarioConfig {
            object_lifespans: Some(vec![(0, 10)]),
            ..ScenarioConfig::default()
        };
        assert!(generate(&bad_span).is_err());
    }
}
