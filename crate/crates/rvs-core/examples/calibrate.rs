//! Calibration probe: stillness ratios and noise PAR distribution.
use rvs_core::config::RadarConfig;
use rvs_core::frontend::{clutter_filter, stillness, PresenceConfig};
use rvs_core::micromotion::MICROMOTION_BINS;
use rvs_core::rng::Rng;
use rvs_core::scene::*;
use rvs_core::baseline::baseline_hr;
use rvs_core::micromotion::MicroMotionSet;

fn ratio_for(scene: &SceneSpec, f_split: f64) -> f64 {
    let config = RadarConfig::default();
    let series = synth_decimated(scene, &config).unwrap();
    let filtered = clutter_filter(&series).unwrap();
    let bin = (scene.subject_range_m / series.range_bin_size).round() as usize;
    let cfg = PresenceConfig { f_split_hz: f_split, ..Default::default() };
    stillness(&filtered, bin, &cfg).map(|(r, _)| r).unwrap_or(0.0)
}

fn scene(resp_a: f64, resp_f: f64, motion: Option<(f64, f64)>, seed: u64) -> SceneSpec {
    SceneSpec {
        subject_range_m: 0.6,
        subject_angle_rad: 0.1,
        track: VitalTrack {
            beat_times: regular_beats(72.0, 8.0, 0.0, seed),
            resp_rate: resp_f,
            resp_amplitude: resp_a,
            heartbeat_amplitude: 0.3e-3,
            heartbeat_pulse_width: 0.05,
            motion_segments: motion
                .map(|(a, bw)| {
                    vec![MotionSegment { start_s: 0.0, end_s: 8.0, amplitude_m: a, bandwidth_hz: bw }]
                })
                .unwrap_or_default(),
        },
        clutter: vec![],
        noise_snr_db: Some(12.0),
        seed,
        duration_s: 8.0,
        interferer: None,
    }
}

fn main() {
    for f_split in [3.0, 4.0, 5.0, 6.0] {
        println!("== f_split {f_split} Hz ==");
        for (name, s) in [
            ("shallow 2mm@0.2", scene(2e-3, 0.2, None, 1)),
            ("typical 4mm@0.25", scene(4e-3, 0.25, None, 2)),
            ("deep 6mm@0.33", scene(6e-3, 0.33, None, 3)),
            ("stress 8mm@0.40", scene(8e-3, 0.40, None, 4)),
            ("motion 1cm/5Hz", scene(3e-3, 0.25, Some((1e-2, 5.0)), 5)),
            ("motion 3cm/6Hz", scene(3e-3, 0.25, Some((3e-2, 6.0)), 6)),
            ("motion 5cm/4Hz", scene(3e-3, 0.25, Some((5e-2, 4.0)), 7)),
        ] {
            let r = ratio_for(&s, f_split);
            println!("  {name:>18}: ratio {r:8.2}");
        }
    }

    // Noise PAR distribution.
    let mut rng = Rng::new(99);
    let mut pars = Vec::new();
    for _ in 0..300 {
        let waveforms: Vec<Vec<f64>> = (0..MICROMOTION_BINS)
            .map(|_| (0..900).map(|_| rng.normal()).collect())
            .collect();
        let m = MicroMotionSet { bin_indices: (0..16).collect(), waveforms, sample_rate: 15.0, clamped: false };
        let rep = baseline_hr(&m, 1e9).unwrap();
        pars.push(rep.par);
    }
    pars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("noise PAR: p50 {:.2} p90 {:.2} p95 {:.2} p99 {:.2} max {:.2}",
        pars[150], pars[270], pars[285], pars[297], pars[299]);
}
