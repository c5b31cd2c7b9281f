use cuetrack::assoc::{svm_train, FeatureSet};
use cuetrack::experiment::ExperimentConfig;
use cuetrack::kalman::{estimate_noise, NoiseEstimationOptions, ObservationMode};
use cuetrack::simulator::{generate, residual_sequences, svm_samples};

fn main() {
    let config = ExperimentConfig::default();
    let mut train = config.train_scenario.clone();
    train.seed = config.base_seed;
    let (gt, frames) = generate(&train).unwrap();
    let seqs = residual_sequences(&gt, &frames, ObservationMode::SingleFrame).unwrap();
    let noise = estimate_noise(&seqs, ObservationMode::SingleFrame, train.dt(),
        &NoiseEstimationOptions::default()).unwrap();
    let samples = svm_samples(&gt, &frames, &noise, ObservationMode::SingleFrame).unwrap();
    let features = FeatureSet { embedding: false, displacement: false, mahalanobis: true, class_cost: true };

    for (reg_c, epochs) in [(1.0, 200), (100.0, 500), (1e4, 1000), (1e5, 1000), (1e5, 3000), (1e6, 3000)] {
        let t = std::time::Instant::now();
        let model = svm_train(&samples, features, reg_c, epochs, 1).unwrap();
        let mut pos = (0, 0);
        let mut neg = (0, 0);
        for s in &samples {
            let score = model.score(&s.features).unwrap();
            if s.is_match { pos.1 += 1; if score > 0.0 { pos.0 += 1; } }
            else { neg.1 += 1; if score <= 0.0 { neg.0 += 1; } }
        }
        println!("C={reg_c:>9.0} epochs={epochs:>5}: pos {:.3} neg {:.3}  w={:?} b={:.3} ({:?})",
            pos.0 as f64 / pos.1 as f64, neg.0 as f64 / neg.1 as f64, model.weights, model.bias, t.elapsed());
    }
}
