//! Stillness-gate yield across the corpus samplers.
use rvs_core::config::RadarConfig;
use rvs_core::corpus::{sample_scene, SceneKind};
use rvs_core::frontend::{clutter_filter, stillness_segmented, PresenceConfig};
use rvs_core::scene::synth_decimated;
use rvs_core::track::Profile;

fn main() {
    let config = RadarConfig::default();
    let cfg = PresenceConfig::default();
    for kind in [SceneKind::Normal, SceneKind::HarmonicStress] {
        let mut ratios = Vec::new();
        for i in 0..60 {
            let scene = sample_scene(7070, i, kind, Profile::Sleep, 62.0);
            let series = synth_decimated(&scene, &config).unwrap();
            let window = series.slice_time(0, 900);
            let filtered = clutter_filter(&window).unwrap();
            let bin = (scene.subject_range_m / series.range_bin_size).round() as usize;
            let r = stillness_segmented(&filtered, bin, &cfg).map(|(r, _)| r).unwrap_or(0.0);
            ratios.push((r, scene.track.resp_amplitude * 1e3, scene.track.resp_rate));
        }
        ratios.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let below = ratios.iter().filter(|&&(r, _, _)| r < cfg.theta_still).count();
        println!("{kind:?}: {below}/60 below theta; lowest: {:?}", &ratios[..8.min(ratios.len())]);
    }
}
