use cuetrack::experiment::{
    feature_battery, feature_label, fit_models, mode_for, run_experiment, ExperimentConfig,
};
use cuetrack::metrics::evaluate;
use cuetrack::simulator::{generate, ScenarioConfig};
use cuetrack::tracker::{run_sequence, TrackerConfig};

fn low_noise() {
    println!("== criterion 7 probe: low-noise {{C,KF,E}} ==");
    let scenario = ScenarioConfig {
        n_frames: 300,
        fps: 30.0,
        image_size: (1280.0, 720.0),
        n_objects: 5,
        measurement_sigma: 1.0,
        miss_prob: 0.05,
        fp_rate: 0.1,
        process_sigma: 3.0,
        n_classes: 3,
        class_confusion_prob: 0.05,
        box_size_range: (50.0, 100.0),
        init_speed: 150.0,
        ..ScenarioConfig::default()
    };
    let config = ExperimentConfig {
        train_scenario: ScenarioConfig { seed: 900, n_frames: 300, ..scenario.clone() },
        eval_scenario: scenario.clone(),
        n_eval_seeds: 10,
        base_seed: 900,
        ..ExperimentConfig::default()
    };
    let t = std::time::Instant::now();
    let models = fit_models(&config).unwrap();
    println!("fit: {:?}", t.elapsed());
    // feature set {C,KF,E} is battery index 2
    let features = feature_battery()[2];
    let svm = &models.svms[2];
    let mode = mode_for(&features);
    for seed in 0..10u64 {
        let t = std::time::Instant::now();
        let mut sc = scenario.clone();
        sc.seed = 901 + seed;
        let (gt, frames) = generate(&sc).unwrap();
        let tc = TrackerConfig {
            dt_ref: sc.dt(),
            stable_hits: 3,
            max_unobserved: 0.5,
            mode,
            noise: models.noise_for(mode).clone(),
            svm: svm.clone(),
            emit_tentative: false,
        };
        let outputs = run_sequence(&frames, tc).unwrap();
        let r = evaluate(&gt, &outputs, 0.5).unwrap();
        println!(
            "seed {seed}: MOTA {:.4} MOTP {:.4} mme {} miss {} fp {} ({:?})",
            r.mota, r.motp, r.counts.mismatches, r.counts.misses, r.counts.false_positives, t.elapsed()
        );
    }
}

fn battery() {
    println!("== criterion 8 probe: stress battery ==");
    let config = ExperimentConfig { n_eval_seeds: 20, ..ExperimentConfig::default() };
    let t = std::time::Instant::now();
    let result = run_experiment(&config).unwrap();
    println!("battery: {:?}", t.elapsed());
    println!("{:<10} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "features", "MOTP", "MOTA", "r_m", "r_fp", "r_mme", "MT%", "PT%", "ML%");
    for o in &result.outcomes {
        let m = o.mean();
        println!("{:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.2} {:>7.2} {:>7.2}",
            feature_label(&o.features), m.motp, m.mota, m.r_m, m.r_fp, m.r_mme,
            m.mostly_tracked, m.partially_tracked, m.mostly_lost);
    }
    let ck = result.outcomes[0].mean();
    let ckd = result.outcomes[1].mean();
    let cke = result.outcomes[2].mean();
    println!("8a: D raises MOTA: {} ({:.4} -> {:.4})", ckd.mota > ck.mota, ck.mota, ckd.mota);
    println!("8a: D lowers r_m: {} ({:.4} -> {:.4})", ckd.r_m < ck.r_m, ck.r_m, ckd.r_m);
    println!("8b: E lowers r_m: {} ({:.4} -> {:.4})", cke.r_m < ck.r_m, ck.r_m, cke.r_m);
    println!("8b: E raises MT: {} ({:.2} -> {:.2})", cke.mostly_tracked > ck.mostly_tracked, ck.mostly_tracked, cke.mostly_tracked);
    println!("8b: E raises r_mme: {} ({:.4} -> {:.4})", cke.r_mme > ck.r_mme, ck.r_mme, cke.r_mme);
}

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_default();
    if arg != "battery" { low_noise(); }
    if arg != "low" { battery(); }
}
