use prefelicit::domain::MistakeProfile;
use prefelicit::harness::config::EvalConfig;
use prefelicit::harness::*;
use prefelicit::proxy::TranscriptStore;
use rayon::prelude::*;

fn main() {
    let students = 8usize;
    // (label, mistakes, bt_temp, comparison_lr)
    let variants: Vec<(&str, MistakeProfile, f64, f64)> = vec![
        ("base T=10",      MistakeProfile { value_noise_std: 0.15, group_omission_prob: 0.5,  strength_noise_std: 0.1, gamma: 1.0 }, 10.0, 0.01),
        ("noisyvals T=10", MistakeProfile { value_noise_std: 0.30, group_omission_prob: 0.25, strength_noise_std: 0.15, gamma: 1.0 }, 10.0, 0.01),
        ("noisyvals T=5",  MistakeProfile { value_noise_std: 0.30, group_omission_prob: 0.25, strength_noise_std: 0.15, gamma: 1.0 }, 5.0, 0.01),
        ("nv gentle",      MistakeProfile { value_noise_std: 0.30, group_omission_prob: 0.25, strength_noise_std: 0.15, gamma: 1.0 }, 10.0, 0.005),
        ("vnoise only",    MistakeProfile { value_noise_std: 0.35, group_omission_prob: 0.15, strength_noise_std: 0.1, gamma: 1.0 }, 10.0, 0.01),
    ];
    let mut jobs = vec![];
    for (i, v) in variants.iter().enumerate() {
        for acc in [1.0f64, 0.72] {
            jobs.push((i, v.clone(), acc));
        }
    }
    let results: Vec<(usize, String, f64, Vec<f64>, f64)> = jobs
        .par_iter()
        .map(|(i, (label, mistakes, temp, lr), acc)| {
            let mut cfg = ExperimentConfig {
                num_students: students,
                bt_temperature: *temp,
                mistakes: *mistakes,
                proxy: ProxySettings { accuracy: *acc, ..Default::default() },
                eval: EvalConfig { grid: Some(vec![0, 500]), eval_set_size: 300, ..Default::default() },
                ..Default::default()
            };
            cfg.train.comparison_lr = *lr;
            let instances = generate_instances(&cfg);
            let proxy = ProxyRunner::Simulated { accuracy: *acc };
            let ts = TranscriptStore::disabled();
            let mut finals = vec![];
            let mut headrooms = vec![];
            for instance in &instances {
                let r = run_student(&cfg, instance, &proxy, &ts).unwrap();
                finals.push(r.final_normalized_value);
                headrooms.push(100.0 * r.optimal_true_value / r.gui_true_value);
            }
            let hm = headrooms.iter().sum::<f64>() / headrooms.len() as f64;
            (*i, format!("{label} acc={acc}"), *acc, finals, hm)
        })
        .collect();
    let mut sorted = results;
    sorted.sort_by_key(|r| (r.0, (r.2 * 100.0) as i64));
    for (_, label, _, fin, hm) in sorted {
        let m = fin.iter().sum::<f64>() / fin.len() as f64;
        println!("{label}: final {:.1} (headroom {:.0})  {:?}", m, hm,
            fin.iter().map(|x| x.round()).collect::<Vec<_>>());
    }
}
