//! Linear SVM over the pairwise association metrics.
//!
//! Training minimizes the L2-regularized mean hinge loss with full-batch
//! subgradient descent; the per-epoch accumulation order is reshuffled from
//! the seed and the step length backtracks until the objective does not
//! increase, so the objective is non-increasing across epochs and the whole
//! run is deterministic for a fixed seed.

use super::{AssocError, CostFeatures, FeatureSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trained gate/cost classifier: a standardizing affine map followed by a
/// signed distance to the separating hyperplane. Positive scores mean "the
/// detection belongs to this track".
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub features: FeatureSet,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
}

impl SvmModel {
    fn check_layout(&self) -> Result<(), AssocError> {
        let dim = self.features.dim();
        if self.weights.len() != dim
            || self.feature_means.len() != dim
            || self.feature_scales.len() != dim
        {
            return Err(AssocError::LayoutMismatch {
                expected: dim,
                got: self.weights.len(),
            });
        }
        if self.feature_scales.iter().any(|&s| !(s > 0.0)) {
            return Err(AssocError::InvalidScale);
        }
        Ok(())
    }

    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.feature_means)
            .zip(&self.feature_scales)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// Signed distance to the hyperplane for one feature tuple.
    pub fn score(&self, features: &CostFeatures) -> Result<f64, AssocError> {
        self.check_layout()?;
        let raw = self.features.vector(features)?;
        let std = self.standardize(&raw);
        Ok(self
            .weights
            .iter()
            .zip(&std)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias)
    }
}

/// Signed distance to the separating hyperplane; positive means the
/// detection belongs to the track.
pub fn svm_score(model: &SvmModel, features: &CostFeatures) -> Result<f64, AssocError> {
    model.score(features)
}

/// One labeled training pair.
#[derive(Debug, Clone)]
pub struct SvmSample {
    pub features: CostFeatures,
    pub is_match: bool,
}

fn objective(c: f64, xs: &[Vec<f64>], ys: &[f64], w: &[f64], b: f64) -> f64 {
    let n = xs.len() as f64;
    let reg: f64 = w.iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let margin = y * (dot(w, x) + b);
            (1.0 - margin).max(0.0)
        })
        .sum::<f64>()
        / n;
    reg + hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains the linear SVM on standardized features.
pub fn svm_train(
    samples: &[SvmSample],
    features: FeatureSet,
    reg_c: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmModel, AssocError> {
    if !(reg_c > 0.0) {
        return Err(AssocError::InvalidRegularization(reg_c));
    }
    if samples.is_empty() {
        return Err(AssocError::DegenerateTraining);
    }
    let has_pos = samples.iter().any(|s| s.is_match);
    let has_neg = samples.iter().any(|s| !s.is_match);
    if !has_pos || !has_neg {
        return Err(AssocError::DegenerateTraining);
    }

    let dim = features.dim();
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    let mut ys: Vec<f64> = Vec::with_capacity(samples.len());
    for s in samples {
        let v = features.vector(&s.features)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(AssocError::NonFiniteFeature);
        }
        raw.push(v);
        ys.push(if s.is_match { 1.0 } else { -1.0 });
    }

    let n = raw.len();
    let mut means = vec![0.0; dim];
    for x in &raw {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut scales = vec![0.0; dim];
    for x in &raw {
        for (s, (v, m)) in scales.iter_mut().zip(x.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scales {
        let std = (*s / n as f64).sqrt();
        *s = if std > 1e-12 { std } else { 1.0 };
    }

    let xs: Vec<Vec<f64>> = raw
        .iter()
        .map(|x| {
            x.iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut value = objective(reg_c, &xs, &ys, &w, b);
    let mut best = (value, w.clone(), b);
    let mut step = 1.0;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for &i in &order {
            let margin = ys[i] * (dot(&w, &xs[i]) + b);
            if margin < 1.0 {
                for (g, x) in grad_w.iter_mut().zip(&xs[i]) {
                    *g -= ys[i] * x;
                }
                grad_b -= ys[i];
            }
        }
        let inv_n = 1.0 / n as f64;
        for (g, wi) in grad_w.iter_mut().zip(&w) {
            *g = *g * inv_n + wi / reg_c;
        }
        grad_b *= inv_n;

        let mut accepted = false;
        for _ in 0..40 {
            let cand_w: Vec<f64> = w.iter().zip(&grad_w).map(|(wi, g)| wi - step * g).collect();
            let cand_b = b - step * grad_b;
            let cand_value = objective(reg_c, &xs, &ys, &cand_w, cand_b);
            if cand_value <= value {
                w = cand_w;
                b = cand_b;
                value = cand_value;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if value < best.0 {
            best = (value, w.clone(), b);
        }
    }

    let (_, weights, bias) = best;
    Ok(SvmModel {
        features,
        weights,
        bias,
        feature_means: means,
        feature_scales: scales,
    })
}

/// Objective of a trained model on a sample set; exposed so callers can
/// check training diagnostics.
pub fn hinge_objective(
    model: &SvmModel,
    samples: &[SvmSample],
    reg_c: f64,
) -> Result<f64, AssocError> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for s in samples {
        xs.push(model.standardize(&model.features.vector(&s.features)?));
        ys.push(if s.is_match { 1.0 } else { -1.0 });
    }
    Ok(objective(reg_c, &xs, &ys, &model.weights, model.bias))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(e: f64, d: f64, m: f64, c: f64) -> CostFeatures {
        CostFeatures {
            embedding_dist: e,
            displacement_dist: Some(d),
            mahalanobis_dist: m,
            class_cost: c,
        }
    }

    fn toy_set() -> Vec<SvmSample> {
        let mut samples = Vec::new();
        for i in 0..20 {
            let eps = i as f64 * 0.01;
            samples.push(SvmSample {
                features: feat(eps, eps, eps, 0.0),
                is_match: true,
            });
            samples.push(SvmSample {
                features: feat(10.0 + eps, 10.0 + eps, 10.0 + eps, 1.0),
                is_match: false,
            });
        }
        samples
    }

    #[test]
    fn separable_set_fully_classified() {
        let samples = toy_set();
        let model = svm_train(&samples, FeatureSet::all(), 1.0, 200, 7).unwrap();
        for s in &samples {
            let score = model.score(&s.features).unwrap();
            assert_eq!(score > 0.0, s.is_match, "score {score} for {:?}", s.features);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let samples = toy_set();
        let a = svm_train(&samples, FeatureSet::all(), 1.0, 100, 3).unwrap();
        let b = svm_train(&samples, FeatureSet::all(), 1.0, 100, 3).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn duplicated_dataset_same_decision_function() {
        let samples = toy_set();
        let mut doubled = samples.clone();
        doubled.extend(samples.iter().cloned());
        let a = svm_train(&samples, FeatureSet::all(), 1.0, 400, 11).unwrap();
        let b = svm_train(&doubled, FeatureSet::all(), 1.0, 400, 11).unwrap();
        for s in &samples {
            let sa = a.score(&s.features).unwrap();
            let sb = b.score(&s.features).unwrap();
            assert!((sa - sb).abs() < 1e-6, "{sa} vs {sb}");
        }
    }

    #[test]
    fn single_label_rejected() {
        let samples: Vec<SvmSample> = (0..5)
            .map(|_| SvmSample {
                features: feat(0.0, 0.0, 0.0, 0.0),
                is_match: true,
            })
            .collect();
        assert!(matches!(
            svm_train(&samples, FeatureSet::all(), 1.0, 10, 0),
            Err(AssocError::DegenerateTraining)
        ));
    }

    #[test]
    fn non_finite_feature_rejected() {
        let samples = vec![
            SvmSample {
                features: feat(f64::NAN, 0.0, 0.0, 0.0),
                is_match: true,
            },
            SvmSample {
                features: feat(1.0, 1.0, 1.0, 1.0),
                is_match: false,
            },
        ];
        assert!(matches!(
            svm_train(&samples, FeatureSet::all(), 1.0, 10, 0),
            Err(AssocError::NonFiniteFeature)
        ));
    }

    #[test]
    fn score_arithmetic() {
        let model = SvmModel {
            features: FeatureSet::all(),
            weights: vec![-1.0, -1.0, -1.0, -1.0],
            bias: 2.0,
            feature_means: vec![0.0; 4],
            feature_scales: vec![1.0; 4],
        };
        let s = model.score(&feat(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(s, 2.0);
        // increasing the mahalanobis feature strictly decreases the score
        let s1 = model.score(&feat(0.0, 0.0, 1.0, 0.0)).unwrap();
        let s2 = model.score(&feat(0.0, 0.0, 2.0, 0.0)).unwrap();
        assert!(s1 > s2);
    }

    #[test]
    fn layout_mismatch_detected() {
        let model = SvmModel {
            features: FeatureSet::all(),
            weights: vec![1.0; 3],
            bias: 0.0,
            feature_means: vec![0.0; 3],
            feature_scales: vec![1.0; 3],
        };
        assert!(matches!(
            model.score(&feat(0.0, 0.0, 0.0, 0.0)),
            Err(AssocError::LayoutMismatch { .. })
        ));
    }
}
