//! Property tests for the geometric primitives, the assignment solver and
//! the filter invariants.

mod common;

use common::{brute_force_assignment, random_cost_matrix, seeded_rng};
use cuetrack::assoc::hungarian;
use cuetrack::geometry::{iou, l2_distance, BoundingBox};
use cuetrack::kalman::{predict, update, KalmanState, NoiseModel, ObservationMode};
use nalgebra::{SMatrix, SVector};
use proptest::prelude::*;
use rand::Rng;

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (
        -500.0..500.0f64,
        -500.0..500.0f64,
        0.1..300.0f64,
        0.1..300.0f64,
    )
        .prop_map(|(cx, cy, w, h)| BoundingBox { cx, cy, w, h })
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        let ba = iou(&b, &a);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn iou_translation_invariant(a in arb_box(), b in arb_box(),
                                 dx in -200.0..200.0f64, dy in -200.0..200.0f64) {
        let shift = |bx: &BoundingBox| BoundingBox { cx: bx.cx + dx, cy: bx.cy + dy, ..*bx };
        let before = iou(&a, &b);
        let after = iou(&shift(&a), &shift(&b));
        prop_assert!((before - after).abs() <= 1e-12);
    }

    #[test]
    fn l2_triangle_inequality(u in prop::collection::vec(-100.0..100.0f64, 8),
                              v in prop::collection::vec(-100.0..100.0f64, 8),
                              w in prop::collection::vec(-100.0..100.0f64, 8)) {
        let uv = l2_distance(&u, &v).unwrap();
        let vw = l2_distance(&v, &w).unwrap();
        let uw = l2_distance(&u, &w).unwrap();
        prop_assert!(uw <= uv + vw + 1e-12);
    }
}

#[test]
fn hungarian_equals_brute_force_on_random_matrices() {
    let mut rng = seeded_rng(71);
    for case in 0..1000 {
        let cost = random_cost_matrix(&mut rng, 7);
        let solution = hungarian(&cost).unwrap();
        let (oracle_card, oracle_cost) = brute_force_assignment(&cost);
        assert_eq!(
            solution.cardinality(),
            oracle_card,
            "case {case}: cardinality mismatch on {cost:?}"
        );
        assert_eq!(
            solution.total_cost, oracle_cost,
            "case {case}: cost mismatch on {cost:?}"
        );
    }
}

#[test]
fn hungarian_invariant_under_row_and_column_shifts() {
    let mut rng = seeded_rng(72);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let base: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| Some(rng.random_range(-40..=40) as f64 / 4.0))
                    .collect()
            })
            .collect();
        let original = hungarian(&base).unwrap().total_cost;

        let shift = rng.random_range(-20..=20) as f64 / 4.0;
        let row = rng.random_range(0..n);
        let mut shifted = base.clone();
        for cell in &mut shifted[row] {
            *cell = cell.map(|c| c + shift);
        }
        let row_shifted = hungarian(&shifted).unwrap().total_cost;
        assert_eq!(row_shifted, original + shift);

        let col = rng.random_range(0..n);
        let mut shifted = base.clone();
        for r in &mut shifted {
            r[col] = r[col].map(|c| c + shift);
        }
        let col_shifted = hungarian(&shifted).unwrap().total_cost;
        assert_eq!(col_shifted, original + shift);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn predict_update_keep_covariance_valid(seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let noise = NoiseModel::diagonal([0.1; 8], [1.0; 4], [1.0; 6], 0.05).unwrap();
        let a = SMatrix::<f64, 8, 8>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let cov = a * a.transpose() + SMatrix::<f64, 8, 8>::identity();
        let mut state = KalmanState::new(SVector::zeros(), cov).unwrap();
        for _ in 0..20 {
            state = predict(&state, rng.random_range(0.01..0.1), &noise).unwrap();
            let z: Vec<f64> = (0..4).map(|i| state.mean[i] + rng.random_range(-2.0..2.0)).collect();
            state = update(&state, &z, ObservationMode::SingleFrame, &noise).unwrap();
            let p = &state.covariance;
            prop_assert!((p - p.transpose()).amax() <= 1e-9);
            prop_assert!(nalgebra::Cholesky::new(*p).is_some());
        }
    }

    #[test]
    fn prediction_composes_without_process_noise(a in 0.01..1.0f64, b in 0.01..1.0f64) {
        let noise = NoiseModel::diagonal([0.0; 8], [1.0; 4], [1.0; 6], 1.0).unwrap();
        let mean = SVector::<f64, 8>::from_fn(|i, _| i as f64 - 3.5);
        let state = KalmanState::new(mean, SMatrix::identity()).unwrap();
        let split = predict(&predict(&state, a, &noise).unwrap(), b, &noise).unwrap();
        let joined = predict(&state, a + b, &noise).unwrap();
        prop_assert!((split.mean - joined.mean).amax() <= 1e-9);
        prop_assert!((split.covariance - joined.covariance).amax() <= 1e-9);
    }
}
