use cuetrack::experiment::{feature_label, run_experiment, ExperimentConfig};
use cuetrack::simulator::ScenarioConfig;

fn run(name: &str, eval: ScenarioConfig, seeds: u64) {
    let train = ScenarioConfig { n_frames: 400, ..eval.clone() };
    let config = ExperimentConfig {
        train_scenario: train,
        eval_scenario: eval,
        n_eval_seeds: seeds,
        ..ExperimentConfig::default()
    };
    let t = std::time::Instant::now();
    let result = run_experiment(&config).unwrap();
    println!("== {name} ({:?}) ==", t.elapsed());
    println!("{:<10} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "features", "MOTP", "MOTA", "r_m", "r_fp", "r_mme", "MT%", "ML%");
    for o in &result.outcomes {
        let m = o.mean();
        println!("{:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.2} {:>7.2}",
            feature_label(&o.features), m.motp, m.mota, m.r_m, m.r_fp, m.r_mme,
            m.mostly_tracked, m.mostly_lost);
    }
    let ck = result.outcomes[0].mean();
    let ckd = result.outcomes[1].mean();
    let cke = result.outcomes[2].mean();
    println!("8a MOTA up {} | 8a r_m down {} | 8b r_m down {} | 8b MT up {} | 8b r_mme up {}",
        ckd.mota > ck.mota, ckd.r_m < ck.r_m, cke.r_m < ck.r_m,
        cke.mostly_tracked > ck.mostly_tracked, cke.r_mme > ck.r_mme);
}

fn main() {
    let hard = ScenarioConfig {
        n_frames: 600,
        fps: 30.0,
        image_size: (800.0, 450.0),
        n_objects: 10,
        process_sigma: 12.0,
        measurement_sigma: 2.0,
        miss_prob: 0.25,
        fp_rate: 1.0,
        n_classes: 3,
        class_confusion_prob: 0.2,
        box_size_range: (25.0, 40.0),
        init_speed: 250.0,
        ..ScenarioConfig::default()
    };
    run("hard", hard.clone(), 8);

    let brutal = ScenarioConfig {
        process_sigma: 20.0,
        measurement_sigma: 3.0,
        box_size_range: (22.0, 34.0),
        init_speed: 300.0,
        ..hard.clone()
    };
    run("brutal", brutal, 8);
}
