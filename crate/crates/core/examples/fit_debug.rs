use cuetrack::experiment::{feature_battery, feature_label, fit_models, mode_for, ExperimentConfig};
use cuetrack::simulator::{generate, svm_samples};

fn main() {
    let config = ExperimentConfig::default();
    let models = fit_models(&config).unwrap();
    println!("noise single q diag: {:?}", (0..8).map(|i| models.noise_single.process_q[(i,i)]).collect::<Vec<_>>());
    println!("noise single r diag: {:?}", (0..4).map(|i| models.noise_single.obs_r_single[(i,i)]).collect::<Vec<_>>());

    let mut train = config.train_scenario.clone();
    train.seed = config.base_seed;
    let (gt, frames) = generate(&train).unwrap();

    for (i, features) in feature_battery().iter().enumerate() {
        let svm = &models.svms[i];
        let mode = mode_for(features);
        let samples = svm_samples(&gt, &frames, models.noise_for(mode), mode).unwrap();
        let n_pos = samples.iter().filter(|s| s.is_match).count();
        let n_neg = samples.len() - n_pos;
        let mut pos_acc = 0usize;
        let mut neg_acc = 0usize;
        for s in &samples {
            let score = svm.score(&s.features).unwrap();
            if s.is_match && score > 0.0 { pos_acc += 1; }
            if !s.is_match && score <= 0.0 { neg_acc += 1; }
        }
        println!(
            "{}: pos {}/{} ({:.3}), neg {}/{} ({:.3}); w = {:?}, b = {:.4}",
            feature_label(features),
            pos_acc, n_pos, pos_acc as f64 / n_pos as f64,
            neg_acc, n_neg, neg_acc as f64 / n_neg as f64,
            svm.weights, svm.bias
        );
        // score stats for positives
        let mut scores: Vec<f64> = samples.iter().filter(|s| s.is_match)
            .map(|s| svm.score(&s.features).unwrap()).collect();
        scores.sort_by(f64::total_cmp);
        println!("  pos score quantiles: p5 {:.3}, p50 {:.3}, p95 {:.3}",
            scores[scores.len()/20], scores[scores.len()/2], scores[scores.len()*19/20]);
        // feature stats
        let mean_maha_pos: f64 = samples.iter().filter(|s| s.is_match).map(|s| s.features.mahalanobis_dist).sum::<f64>() / n_pos as f64;
        let mean_maha_neg: f64 = samples.iter().filter(|s| !s.is_match).map(|s| s.features.mahalanobis_dist).sum::<f64>() / n_neg as f64;
        println!("  maha mean pos {:.3} neg {:.3}; means {:?} scales {:?}", mean_maha_pos, mean_maha_neg, svm.feature_means, svm.feature_scales);
    }
}
