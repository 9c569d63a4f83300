//! Synthetic corpus generation.
//!
//! Scenes are sampled with per-scene seeds derived from a master seed by a
//! splittable counter, so corpus generation is reproducible and trivially
//! parallel. The default HR range spans 45-100 bpm (sleep) or 45-115 bpm
//! (meditation), respiration 0.15-0.4 Hz at 1-8 mm, heartbeat 0.1-0.5 mm,
//! keeping respiration one to two orders of magnitude stronger than the
//! heartbeat.
//!
//! The harmonic-stress subset targets the hard case where a respiration
//! harmonic (2x, 3x or 4x the respiration rate in bpm) lands within 3 bpm of
//! the true HR. Those scenes use deep, fast breathing at the low end of the
//! SNR range, where the 15 Hz phase sampling can slip whole wrap cycles and
//! the slip artifacts carry strong respiration harmonics.

use crate::config::RadarConfig;
use crate::net::normalize_motions;
use crate::pipeline::{analyze_window, window_slots};
use crate::rng::{child_seed, Rng};
use crate::scene::{
    gen_ground_truth, regular_beats, synth_decimated, ClutterReflector, Interferer, SceneSpec,
    VitalTrack,
};
use crate::session::RunConfig;
use crate::track::Profile;
use crate::train::{label_spectrum, label_waveform, TrainingExample};

/// What a sampled scene exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Normal,
    HarmonicStress,
}

/// True when a 2x/3x/4x respiration harmonic falls within 3 bpm of the
/// track's mean HR.
pub fn is_harmonic_stress(track: &VitalTrack) -> bool {
    let resp_bpm = track.resp_rate * 60.0;
    match track.mean_hr_bpm() {
        Some(hr) => (2..=4).any(|k| (k as f64 * resp_bpm - hr).abs() <= 3.0),
        None => false,
    }
}

/// Samples one scene deterministically from `(master_seed, index)`.
pub fn sample_scene(
    master_seed: u64,
    index: u64,
    kind: SceneKind,
    profile: Profile,
    duration_s: f64,
) -> SceneSpec {
    let seed = child_seed(master_seed, index);
    let mut rng = Rng::new(seed);

    let hr_max = match profile {
        Profile::Sleep => 100.0,
        Profile::Meditation => 115.0,
    };

    let (resp_rate, resp_amplitude, heartbeat_amplitude, hr_bpm, snr_db) = match kind {
        SceneKind::Normal => {
            let heart = rng.uniform_in(0.1e-3, 0.5e-3);
            // Respiration stays 10x-100x the heartbeat within 1-7 mm.
            let lo = (10.0 * heart).max(1.0e-3);
            let hi = (100.0 * heart).min(7.0e-3);
            let resp = rng.uniform_in(lo, hi.max(lo + 1e-6));
            // Deep and fast at once spreads the phase signal past the
            // Doppler split and the stillness gate would drop the scene;
            // keep fast rates for moderate depths.
            let max_rate = if resp > 4.5e-3 { 0.28 } else { 0.4 };
            (
                rng.uniform_in(0.15, max_rate),
                resp,
                heart,
                rng.uniform_in(45.0, hr_max),
                rng.uniform_in(12.0, 20.0),
            )
        }
        SceneKind::HarmonicStress => {
            let resp_rate = rng.uniform_in(0.30, 0.34);
            let resp_bpm = resp_rate * 60.0;
            let k = if rng.uniform() < 0.5 { 3.0 } else { 4.0 };
            let hr = (k * resp_bpm + rng.uniform_in(-2.5, 2.5)).clamp(45.0, hr_max);
            (
                resp_rate,
                rng.uniform_in(4.5e-3, 5.5e-3),
                rng.uniform_in(0.1e-3, 0.3e-3),
                hr,
                rng.uniform_in(10.0, 14.0),
            )
        }
    };

    let beats = regular_beats(hr_bpm, duration_s, 0.02, child_seed(seed, 1));
    let n_clutter = 1 + rng.below(3);
    let clutter = (0..n_clutter)
        .map(|_| ClutterReflector {
            range_m: rng.uniform_in(0.2, 2.0),
            amplitude: rng.uniform_in(0.5, 3.0),
        })
        .collect();

    let subject_range_m = rng.uniform_in(0.4, 1.2);

    // A torso is not a point: a second breathing reflection center at a
    // nearby range, with its own depth and a slightly drifting rate, makes
    // the bins around the subject carry mixtures of modulated returns. The
    // composite phase is harmonic-rich, which is exactly what the stress
    // subset needs; normal scenes get a milder secondary half the time.
    let secondary = |rng: &mut Rng, strong: bool| -> Interferer {
        let amp_scale = rng.uniform_in(0.45, 0.8);
        Interferer {
            range_m: subject_range_m + rng.uniform_in(-0.045, 0.045),
            angle_rad: 0.0,
            amplitude: if strong {
                rng.uniform_in(0.5, 0.9)
            } else {
                rng.uniform_in(0.3, 0.6)
            },
            track: VitalTrack {
                beat_times: vec![],
                resp_rate: resp_rate * rng.uniform_in(0.98, 1.02),
                resp_amplitude: resp_amplitude * amp_scale,
                heartbeat_amplitude: 0.0,
                heartbeat_pulse_width: 0.05,
                motion_segments: vec![],
            },
        }
    };
    let interferer = match kind {
        SceneKind::HarmonicStress => Some(secondary(&mut rng, true)),
        SceneKind::Normal => {
            if rng.uniform() < 0.5 {
                Some(secondary(&mut rng, false))
            } else {
                None
            }
        }
    };

    SceneSpec {
        subject_range_m,
        subject_angle_rad: rng.uniform_in(-0.5, 0.5),
        track: VitalTrack {
            beat_times: beats,
            resp_rate,
            resp_amplitude,
            heartbeat_amplitude,
            heartbeat_pulse_width: 0.05,
            motion_segments: vec![],
        },
        clutter,
        noise_snr_db: Some(snr_db),
        seed: child_seed(seed, 2),
        duration_s,
        interferer,
    }
}

/// A corpus mix: `stress_fraction` of the scenes come from the
/// harmonic-stress sampler.
pub fn sample_scenes(
    master_seed: u64,
    count: usize,
    stress_fraction: f64,
    profile: Profile,
    duration_s: f64,
) -> Vec<SceneSpec> {
    (0..count)
        .map(|i| {
            let kind = if (i as f64 + 0.5) / count as f64 <= stress_fraction {
                SceneKind::HarmonicStress
            } else {
                SceneKind::Normal
            };
            sample_scene(master_seed, i as u64, kind, profile, duration_s)
        })
        .collect()
}

/// Renders a scene and turns every eligible window into a training example.
///
/// A window is eligible when the user is detected, still, and the window has
/// a reference HR inside the label band.
pub fn scene_examples(
    scene: &SceneSpec,
    scene_id: u64,
    config: &RadarConfig,
    profile: Profile,
) -> Vec<TrainingExample> {
    let series = match synth_decimated(scene, config) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    series_examples(&series, scene, scene_id, config, profile)
}

/// Same as [`scene_examples`] but over an already rendered (or recorded)
/// range-profile series.
pub fn series_examples(
    series: &crate::config::RangeProfileSeries,
    scene: &SceneSpec,
    scene_id: u64,
    config: &RadarConfig,
    profile: Profile,
) -> Vec<TrainingExample> {
    let run = RunConfig::for_profile(profile);
    let f0 = config.center_frequency();
    let truth = match gen_ground_truth(scene, config, (profile.window_s(), profile.step_s())) {
        Ok(t) => t,
        Err(_) => return Vec::new(),
    };
    let stress = is_harmonic_stress(&scene.track);
    let mut out = Vec::new();
    for (slot, wt) in window_slots(series, profile).iter().zip(truth.windows.iter()) {
        let bpm = match wt.bpm {
            Some(b) if wt.still => b,
            _ => continue,
        };
        let Ok(analysis) = analyze_window(series, *slot, &run, f0) else {
            continue;
        };
        let Some(motions) = analysis.motions else {
            continue;
        };
        let Ok(input) = normalize_motions::<f32>(&motions, profile.window_samples()) else {
            continue;
        };
        let Ok(spec_label) = label_spectrum(bpm) else {
            continue;
        };
        // Beat times relative to the window's first sample instant.
        let window_start = series.time_of(slot.t0);
        let rel_beats: Vec<f64> = scene
            .track
            .beat_times
            .iter()
            .map(|b| b - window_start)
            .filter(|&b| b > -1.0 && b < profile.window_s() + 1.0)
            .collect();
        let pulse_label = label_waveform(&rel_beats, profile.window_samples(), 15.0);
        out.push(TrainingExample {
            input,
            label_pulse: pulse_label.iter().map(|&v| v as f32).collect(),
            label_spectrum: spec_label.iter().map(|&v| v as f32).collect(),
            scene_id,
            window_center: slot.center_s,
            stress,
            truth_bpm: bpm,
        });
    }
    out
}

/// Builds a full training corpus from sampled scenes.
pub fn build_corpus(
    master_seed: u64,
    count: usize,
    stress_fraction: f64,
    profile: Profile,
    duration_s: f64,
    config: &RadarConfig,
) -> Vec<TrainingExample> {
    let scenes = sample_scenes(master_seed, count, stress_fraction, profile, duration_s);
    let mut out = Vec::new();
    for (i, scene) in scenes.iter().enumerate() {
        out.extend(scene_examples(scene, i as u64, config, profile));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_distinct() {
        let a = sample_scene(7, 0, SceneKind::Normal, Profile::Sleep, 90.0);
        let b = sample_scene(7, 0, SceneKind::Normal, Profile::Sleep, 90.0);
        assert_eq!(a, b);
        let c = sample_scene(7, 1, SceneKind::Normal, Profile::Sleep, 90.0);
        assert_ne!(a.seed, c.seed);
        assert_ne!(a.track.beat_times, c.track.beat_times);
    }

    #[test]
    fn normal_scenes_honor_amplitude_ratios() {
        for i in 0..50 {
            let s = sample_scene(11, i, SceneKind::Normal, Profile::Sleep, 90.0);
            let ratio = s.track.resp_amplitude / s.track.heartbeat_amplitude;
            assert!(
                (10.0..=100.0 + 1e-9).contains(&ratio),
                "scene {i}: ratio {ratio}"
            );
            assert!((1.0e-3..=8.0e-3).contains(&s.track.resp_amplitude));
            let hr = s.track.mean_hr_bpm().unwrap();
            assert!((44.0..=101.0).contains(&hr), "hr {hr}");
            assert!((0.3..=1.5).contains(&s.subject_range_m));
        }
    }

    #[test]
    fn beat_times_stay_in_hr_band() {
        for i in 0..20 {
            let s = sample_scene(13, i, SceneKind::Normal, Profile::Sleep, 90.0);
            for w in s.track.beat_times.windows(2) {
                let inst = 60.0 / (w[1] - w[0]);
                assert!((35.0..=200.0).contains(&inst), "instantaneous hr {inst}");
            }
        }
    }

    #[test]
    fn stress_scenes_satisfy_harmonic_predicate() {
        for i in 0..50 {
            let s = sample_scene(17, i, SceneKind::HarmonicStress, Profile::Sleep, 90.0);
            assert!(is_harmonic_stress(&s.track), "scene {i}");
            let snr = s.noise_snr_db.unwrap();
            assert!((10.0..=14.0).contains(&snr));
        }
    }

    #[test]
    fn stress_fraction_respected() {
        let scenes = sample_scenes(19, 20, 0.4, Profile::Sleep, 90.0);
        let stress = scenes.iter().filter(|s| is_harmonic_stress(&s.track)).count();
        assert!(stress >= 8, "{stress} stress scenes");
    }

    #[test]
    fn scene_examples_produce_windows() {
        let config = RadarConfig::default();
        let scene = sample_scene(23, 0, SceneKind::Normal, Profile::Sleep, 92.0);
        let examples = scene_examples(&scene, 0, &config, Profile::Sleep);
        assert_eq!(examples.len(), 3, "92 s gives windows at 60/75/90 s");
        for e in &examples {
            assert_eq!(e.input.ch, 16);
            assert_eq!(e.input.len, 900);
            assert_eq!(e.label_pulse.len(), 900);
            assert_eq!(e.label_spectrum.len(), 189);
            let s: f32 = e.label_spectrum.iter().sum();
            assert!((s - 1.0).abs() < 1e-4);
            // The pulse label carries roughly one pulse per beat.
            let peak = e.label_pulse.iter().cloned().fold(0.0f32, f32::max);
            assert!(peak > 0.9);
        }
    }
}
