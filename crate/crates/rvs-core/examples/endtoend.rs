//! End-to-end dress rehearsal: corpus -> train -> eval pipeline vs baseline.
use std::time::Instant;

use rvs_core::config::RadarConfig;
use rvs_core::corpus::{build_corpus, is_harmonic_stress, sample_scenes, scene_examples};
use rvs_core::net::{ModelSpec, PulseNet};
use rvs_core::pipeline::{evaluation_pairs, metrics_from_pairs, process_series, process_series_baseline};
use rvs_core::scene::{gen_ground_truth, synth_decimated};
use rvs_core::session::RunConfig;
use rvs_core::track::Profile;
use rvs_core::train::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(60);
    let n_eval: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(30);
    let lr: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let batch: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(32);
    let duration: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(92.0);

    let config = RadarConfig::default();
    let profile = Profile::Sleep;

    let t0 = Instant::now();
    let corpus = build_corpus(42, n_train, 0.5, profile, duration, &config);
    println!("corpus: {} windows from {} scenes in {:.1?}", corpus.len(), n_train, t0.elapsed());
    let stress_windows = corpus.iter().filter(|e| e.stress).count();
    println!("  stress windows: {stress_windows}");

    let mut net = PulseNet::<f32>::new(ModelSpec::default_for_len(900)).unwrap();
    net.init_weights(7);
    let cfg = TrainConfig { epochs, seed: 5, lr, batch_size: batch, patience: 40, lr_decay_every: 50, lr_decay: 0.3, val_fraction: 0.12, ..Default::default() };
    let t1 = Instant::now();
    let log = train(&mut net, &corpus, &cfg).unwrap();
    println!("train: {} epochs in {:.1?} ({:.1?}/epoch)", log.len(), t1.elapsed(), t1.elapsed() / log.len() as u32);
    for e in log.iter().step_by(5.max(log.len()/8)) {
        println!("  epoch {:>3}: train {:.3} val {:.3} val_ce {:.3} val_mae {:.2}", e.epoch, e.train_loss, e.val_loss, e.val_ce, e.val_mae_bpm);
    }
    if let Some(e) = log.last() { println!("  last {:>4}: train {:.3} val {:.3} val_ce {:.3} val_mae {:.2}", e.epoch, e.train_loss, e.val_loss, e.val_ce, e.val_mae_bpm); }

    // Held-out scenes (disjoint seed range via index offset).
    let eval_scenes = sample_scenes(43, n_eval, 0.3, profile, 152.0);
    let run = RunConfig::for_profile(profile);
    let f0 = config.center_frequency();
    let t2 = Instant::now();
    let mut all_pairs = Vec::new();
    let mut stress_pipe = Vec::new();
    let mut stress_base = Vec::new();
    let mut n_windows = 0;
    for scene in &eval_scenes {
        let series = synth_decimated(scene, &config).unwrap();
        let truth = gen_ground_truth(scene, &config, (profile.window_s(), profile.step_s())).unwrap();
        let (_, post) = process_series(&series, &mut net, &run, f0).unwrap();
        let (_, post_b) = process_series_baseline(&series, &run, f0).unwrap();
        let pairs = evaluation_pairs(&post, &truth.windows).unwrap();
        let pairs_b = evaluation_pairs(&post_b, &truth.windows).unwrap();
        let stress_tag = if is_harmonic_stress(&scene.track) { "S" } else { "n" };
        for ((est, tr), (est_b, _)) in pairs.iter().zip(pairs_b.iter()) {
            let e = est.map(|v| format!("{v:6.1}")).unwrap_or_else(|| "  --  ".into());
            let b = est_b.map(|v| format!("{v:6.1}")).unwrap_or_else(|| "  --  ".into());
            println!("  [{stress_tag}] truth {tr:6.1}  net {e}  bpf {b}");
        }
        n_windows += pairs.len();
        all_pairs.extend(pairs.clone());
        if is_harmonic_stress(&scene.track) {
            stress_pipe.extend(pairs);
            stress_base.extend(pairs_b);
        }
    }
    println!("eval: {} windows in {:.1?}", n_windows, t2.elapsed());
    // Train-set argmax accuracy for over/underfit diagnosis.
    {
        let idx: Vec<usize> = (0..corpus.len()).collect();
        let (_, tce, tmae) = rvs_core::train::evaluate(&mut net, &corpus, &idx, 1.0).unwrap();
        println!("train-set: ce {tce:.3} mae {tmae:.2}");
    }
    let m = metrics_from_pairs(&all_pairs).unwrap();
    println!("pipeline ALL   : mae {:.2} recall {:.2} n {}", m.mae_bpm, m.recall, m.n_samples);
    if let Ok(ms) = metrics_from_pairs(&stress_pipe) {
        println!("pipeline STRESS: mae {:.2} recall {:.2} n {}", ms.mae_bpm, ms.recall, ms.n_samples);
    }
    if let Ok(mb) = metrics_from_pairs(&stress_base) {
        println!("baseline STRESS: mae {:.2} recall {:.2} n {}", mb.mae_bpm, mb.recall, mb.n_samples);
    }

    // Threshold sensitivity: recall/MAE tradeoff across confidence cuts.
    for theta in [1.05f64, 1.1, 1.15, 1.2, 1.3, 1.5] {
        let run_t = RunConfig { theta_conf: theta, ..RunConfig::for_profile(profile) };
        let mut pairs_t = Vec::new();
        for scene in &eval_scenes {
            let series = synth_decimated(scene, &config).unwrap();
            let truth = gen_ground_truth(&scene, &config, (profile.window_s(), profile.step_s())).unwrap();
            let (_, post) = process_series(&series, &mut net, &run_t, f0).unwrap();
            pairs_t.extend(evaluation_pairs(&post, &truth.windows).unwrap());
        }
        if let Ok(m) = metrics_from_pairs(&pairs_t) {
            println!("theta_conf {theta}: mae {:.2} recall {:.2}", m.mae_bpm, m.recall);
        }
    }
    rvs_core::net::save_model("/tmp/probe_model.rvsm", &net, "sleep").unwrap();
    let _ = scene_examples(&eval_scenes[0], 0, &config, profile);
}
