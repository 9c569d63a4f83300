//! Synthetic scenes with exact ground truth.
//!
//! A scene holds one breathing/beating subject at a given range and angle,
//! optional static clutter, optional gross-motion segments, and optionally a
//! second moving person. Scenes can be rendered either as raw ADC cubes
//! ([`synth_adc`]) or directly as decimated range profiles
//! ([`synth_decimated`], the fast path used for corpus generation). Both
//! paths are bit-deterministic given the scene seed.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{range_resolution, wavelength, AdcCube, RadarConfig, RangeProfileSeries};
use crate::rng::{child_seed, splitmix64, Rng};
use crate::{DspComplex, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("reflector at {0} m is beyond the unambiguous range {1} m")]
    BeyondUnambiguousRange(f64, f64),
    #[error("invalid scene: {0}")]
    Invalid(&'static str),
}

/// A gross body-motion episode: band-limited displacement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSegment {
    pub start_s: f64,
    pub end_s: f64,
    /// Displacement scale, m.
    pub amplitude_m: f64,
    /// Upper band edge of the motion, Hz.
    pub bandwidth_hz: f64,
}

/// The physiological displacement model of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalTrack {
    /// Strictly increasing heartbeat instants, s.
    pub beat_times: Vec<f64>,
    /// Respiration rate, Hz.
    pub resp_rate: f64,
    /// Respiration displacement amplitude, m.
    pub resp_amplitude: f64,
    /// Heartbeat displacement amplitude, m.
    pub heartbeat_amplitude: f64,
    /// Gaussian width (sigma) of one heartbeat pulse, s.
    pub heartbeat_pulse_width: f64,
    pub motion_segments: Vec<MotionSegment>,
}

impl VitalTrack {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.resp_amplitude < 0.0 || self.heartbeat_amplitude < 0.0 {
            return Err(SceneError::Invalid("amplitudes must be non-negative"));
        }
        for w in self.beat_times.windows(2) {
            if w[1] <= w[0] {
                return Err(SceneError::Invalid("beat times must be strictly increasing"));
            }
        }
        Ok(())
    }

    /// Mean HR over all beats, bpm; `None` with fewer than 2 beats.
    pub fn mean_hr_bpm(&self) -> Option<f64> {
        if self.beat_times.len() < 2 {
            return None;
        }
        let span = self.beat_times.last().unwrap() - self.beat_times.first().unwrap();
        Some(60.0 * (self.beat_times.len() - 1) as f64 / span)
    }
}

/// A static point reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterReflector {
    pub range_m: f64,
    pub amplitude: f64,
}

/// A second moving person; present only for robustness scenes. Its HR is
/// never a detection target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub range_m: f64,
    pub angle_rad: f64,
    pub amplitude: f64,
    pub track: VitalTrack,
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub subject_range_m: f64,
    pub subject_angle_rad: f64,
    pub track: VitalTrack,
    #[serde(default)]
    pub clutter: Vec<ClutterReflector>,
    /// ADC-level SNR against the subject's static reflection power, dB.
    /// `None` renders noiseless.
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub interferer: Option<Interferer>,
}

/// Per-window reference values derived from exact beat times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTruth {
    /// Window center, s.
    pub center_s: f64,
    /// Reference HR over the window; `None` when fewer than 2 beats fall in.
    pub bpm: Option<f64>,
    /// False when a motion segment overlaps the window.
    pub still: bool,
}

/// Ground truth for a scene under a given windowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub windows: Vec<WindowTruth>,
    /// Subject displacement sampled at the decimated profile instants, m.
    pub displacement: Vec<f64>,
    /// Timestamps of `displacement`, s.
    pub displacement_times: Vec<f64>,
}

/// Subject displacement at time `t` (respiration + heartbeats + motion).
pub fn synth_displacement(track: &VitalTrack, t: f64) -> f64 {
    let mut d = track.resp_amplitude * (2.0 * std::f64::consts::PI * track.resp_rate * t).sin();

    // Heartbeat pulses: only beats within a few sigma contribute.
    let sigma = track.heartbeat_pulse_width;
    if track.heartbeat_amplitude > 0.0 && sigma > 0.0 && !track.beat_times.is_empty() {
        let reach = 6.0 * sigma;
        let lo = track.beat_times.partition_point(|&b| b < t - reach);
        for &b in &track.beat_times[lo..] {
            if b > t + reach {
                break;
            }
            let x = (t - b) / sigma;
            d += track.heartbeat_amplitude * (-0.5 * x * x).exp();
        }
    }

    for (si, seg) in track.motion_segments.iter().enumerate() {
        if t >= seg.start_s && t <= seg.end_s {
            d += motion_value(seg, si, t);
        }
    }
    d
}

/// Band-limited motion: a small deterministic bank of sinusoids whose
/// frequencies and phases derive from the segment parameters, so
/// [`synth_displacement`] stays a pure function of the track.
fn motion_value(seg: &MotionSegment, index: usize, t: f64) -> f64 {
    const K: usize = 8;
    let mut h = 0xC0FF_EE00u64 ^ (index as u64).wrapping_mul(0x9E37_79B9);
    h ^= seg.start_s.to_bits().rotate_left(1);
    h ^= seg.end_s.to_bits().rotate_left(17);
    h ^= seg.amplitude_m.to_bits().rotate_left(33);
    h ^= seg.bandwidth_hz.to_bits().rotate_left(47);
    let mut acc = 0.0;
    let dt = t - seg.start_s;
    for i in 0..K {
        let u = splitmix64(&mut h) as f64 / u64::MAX as f64;
        let v = splitmix64(&mut h) as f64 / u64::MAX as f64;
        // Spread component frequencies over (0, bandwidth].
        let f = seg.bandwidth_hz * (i as f64 + u) / K as f64;
        let phi = 2.0 * std::f64::consts::PI * v;
        acc += (2.0 * std::f64::consts::PI * f * dt + phi).sin();
    }
    seg.amplitude_m * acc / (K as f64).sqrt()
}

/// One point reflector as seen by the synthesizer.
struct Reflector<'a> {
    range_m: f64,
    angle_rad: f64,
    amplitude: f64,
    track: Option<&'a VitalTrack>,
}

fn reflectors_of(scene: &SceneSpec) -> Vec<Reflector<'_>> {
    let mut rs = vec![Reflector {
        range_m: scene.subject_range_m,
        angle_rad: scene.subject_angle_rad,
        amplitude: 1.0,
        track: Some(&scene.track),
    }];
    for c in &scene.clutter {
        rs.push(Reflector {
            range_m: c.range_m,
            angle_rad: 0.0,
            amplitude: c.amplitude,
            track: None,
        });
    }
    if let Some(intf) = &scene.interferer {
        rs.push(Reflector {
            range_m: intf.range_m,
            angle_rad: intf.angle_rad,
            amplitude: intf.amplitude,
            track: Some(&intf.track),
        });
    }
    rs
}

/// Beat frequency of a reflector, Hz.
fn beat_frequency(config: &RadarConfig, range_m: f64) -> f64 {
    2.0 * config.chirp_slope() * range_m / SPEED_OF_LIGHT
}

/// Largest range whose beat frequency stays below the real-signal Nyquist.
fn unambiguous_range(config: &RadarConfig) -> f64 {
    0.5 * config.adc_rate * SPEED_OF_LIGHT / (2.0 * config.chirp_slope())
}

fn check_ranges(scene: &SceneSpec, config: &RadarConfig) -> Result<(), SceneError> {
    let r_max = unambiguous_range(config);
    for r in reflectors_of(scene) {
        if r.range_m >= r_max {
            return Err(SceneError::BeyondUnambiguousRange(r.range_m, r_max));
        }
        if r.range_m < 0.0 {
            return Err(SceneError::Invalid("negative reflector range"));
        }
    }
    Ok(())
}

/// Per-receiver steering phase for a plane wave from `angle`.
///
/// The array is in the x/y plane; the angle is measured in the x/boresight
/// plane, so only the x coordinate of a receiver contributes.
fn steering_phase(config: &RadarConfig, rx: usize, angle_rad: f64) -> f64 {
    let lambda = wavelength(config);
    2.0 * std::f64::consts::PI * config.rx_positions[rx][0] * angle_rad.sin() / lambda
}

/// ADC noise sigma for the configured SNR against unit subject amplitude.
fn noise_sigma(scene: &SceneSpec) -> f64 {
    match scene.noise_snr_db {
        Some(snr_db) => (0.5 * 10f64.powf(-snr_db / 10.0)).sqrt(),
        None => 0.0,
    }
}

/// Time of chirp `l` in burst `b` from the session start.
fn chirp_time(config: &RadarConfig, burst: usize, chirp: usize) -> f64 {
    burst as f64 / config.burst_rate + chirp as f64 / config.chirp_rate
}

/// Renders the raw ADC cube for a scene.
pub fn synth_adc(scene: &SceneSpec, config: &RadarConfig) -> Result<AdcCube, SceneError> {
    scene.track.validate()?;
    check_ranges(scene, config)?;
    let bursts = (scene.duration_s * config.burst_rate).round() as usize;
    let mut cube = AdcCube::zeroed(config.clone(), bursts);
    let lambda = wavelength(config);
    let n = config.samples_per_chirp;
    let fs = config.adc_rate;

    struct Prep {
        f_beat: f64,
        base_phase: f64,
        steering: Vec<f64>,
        amplitude: f64,
    }
    let reflectors = reflectors_of(scene);
    let preps: Vec<Prep> = reflectors
        .iter()
        .map(|r| Prep {
            f_beat: beat_frequency(config, r.range_m),
            base_phase: 4.0 * std::f64::consts::PI * r.range_m / lambda,
            steering: (0..config.rx_count)
                .map(|m| steering_phase(config, m, r.angle_rad))
                .collect(),
            amplitude: r.amplitude,
        })
        .collect();

    for b in 0..bursts {
        for l in 0..config.chirps_per_burst {
            let t = chirp_time(config, b, l);
            for (r, prep) in reflectors.iter().zip(preps.iter()) {
                let motion_phase = match r.track {
                    Some(track) => {
                        4.0 * std::f64::consts::PI * synth_displacement(track, t) / lambda
                    }
                    None => 0.0,
                };
                let omega = 2.0 * std::f64::consts::PI * prep.f_beat / fs;
                for m in 0..config.rx_count {
                    let phi = prep.base_phase + motion_phase + prep.steering[m];
                    for s in 0..n {
                        let v = prep.amplitude * (omega * s as f64 + phi).cos();
                        cube.set(b, l, m, s, cube.get(b, l, m, s) + v);
                    }
                }
            }
        }
    }

    let sigma = noise_sigma(scene);
    if sigma > 0.0 {
        let mut rng = Rng::new(child_seed(scene.seed, 1));
        for b in 0..bursts {
            for l in 0..config.chirps_per_burst {
                for m in 0..config.rx_count {
                    for s in 0..n {
                        let v = cube.get(b, l, m, s) + sigma * rng.normal();
                        cube.set(b, l, m, s, v);
                    }
                }
            }
        }
    }
    Ok(cube)
}

/// Dirichlet kernel: sum over n in [0, N) of exp(j 2 pi nu n).
fn dirichlet(nu: f64, n: usize) -> DspComplex {
    let frac = nu - nu.round();
    if frac.abs() < 1e-12 {
        return Complex::new(n as f64, 0.0);
    }
    let num = (std::f64::consts::PI * n as f64 * nu).sin();
    let den = (std::f64::consts::PI * nu).sin();
    let mag = num / den;
    let ang = std::f64::consts::PI * nu * (n as f64 - 1.0);
    Complex::new(mag * ang.cos(), mag * ang.sin())
}

/// Renders decimated range profiles directly, equivalent to
/// `preprocess(synth_adc(scene))` on noiseless scenes but an order of
/// magnitude faster: the range FFT of each static-frequency reflector is an
/// analytic Dirichlet template scaled by the chirp-averaged phase factor.
pub fn synth_decimated(
    scene: &SceneSpec,
    config: &RadarConfig,
) -> Result<RangeProfileSeries, SceneError> {
    scene.track.validate()?;
    check_ranges(scene, config)?;
    let bursts = (scene.duration_s * config.burst_rate).round() as usize;
    let pairs = bursts / 2;
    let n = config.samples_per_chirp;
    let lambda = wavelength(config);
    let res = range_resolution(config).map_err(|_| SceneError::Invalid("bad bandwidth"))?;
    let mut series = RangeProfileSeries::zeroed(
        pairs,
        config.rx_count,
        n,
        config.decimated_rate(),
        res,
        config.decimated_start_offset(),
    );

    let reflectors = reflectors_of(scene);
    for r in &reflectors {
        let f_beat = beat_frequency(config, r.range_m);
        let nu = f_beat / config.adc_rate;
        // Positive- and negative-frequency templates of the real cosine.
        let half = 0.5 * r.amplitude;
        let d_plus: Vec<DspComplex> = (0..n)
            .map(|k| dirichlet(nu - k as f64 / n as f64, n) * half)
            .collect();
        let d_minus: Vec<DspComplex> = (0..n)
            .map(|k| dirichlet(-nu - k as f64 / n as f64, n) * half)
            .collect();
        let base_phase = 4.0 * std::f64::consts::PI * r.range_m / lambda;
        let steering: Vec<f64> = (0..config.rx_count)
            .map(|m| steering_phase(config, m, r.angle_rad))
            .collect();

        for p in 0..pairs {
            // Chirp-averaged phase factor over the two source bursts.
            let mut e_plus = Complex::new(0.0, 0.0);
            for b in [2 * p, 2 * p + 1] {
                for l in 0..config.chirps_per_burst {
                    let phi = match r.track {
                        Some(track) => {
                            let t = chirp_time(config, b, l);
                            base_phase
                                + 4.0 * std::f64::consts::PI * synth_displacement(track, t)
                                    / lambda
                        }
                        None => base_phase,
                    };
                    e_plus += Complex::new(phi.cos(), phi.sin());
                }
            }
            e_plus /= (2 * config.chirps_per_burst) as f64;

            for m in 0..config.rx_count {
                let rot = Complex::new(steering[m].cos(), steering[m].sin());
                let ep = e_plus * rot;
                let em = ep.conj();
                let row = series.profile_mut(p, m);
                for k in 0..n {
                    row[k] += ep * d_plus[k] + em * d_minus[k];
                }
            }
        }
    }

    let sigma = noise_sigma(scene);
    if sigma > 0.0 {
        // Equivalent per-bin noise after 40-chirp averaging and the range
        // FFT: complex variance N * sigma^2 / (2 * chirps_per_burst * 2).
        let averaged = (2 * config.chirps_per_burst) as f64;
        let bin_sigma = (n as f64 * sigma * sigma / averaged / 2.0).sqrt();
        let mut rng = Rng::new(child_seed(scene.seed, 2));
        for p in 0..pairs {
            for m in 0..config.rx_count {
                let row = series.profile_mut(p, m);
                for slot in row.iter_mut() {
                    *slot += Complex::new(bin_sigma * rng.normal(), bin_sigma * rng.normal());
                }
            }
        }
    }
    Ok(series)
}

/// Emission-time grid for a windowing `(length, step)` over a duration:
/// the first window ends at `length`, subsequent ones every `step`.
pub fn window_ends(duration_s: f64, window_s: f64, step_s: f64) -> Vec<f64> {
    let mut ends = Vec::new();
    let mut t = window_s;
    while t <= duration_s + 1e-9 {
        ends.push(t);
        t += step_s;
    }
    ends
}

/// Ground truth for a scene under `(window length, step)` windowing.
pub fn gen_ground_truth(
    scene: &SceneSpec,
    config: &RadarConfig,
    windowing: (f64, f64),
) -> Result<GroundTruth, SceneError> {
    let (window_s, step_s) = windowing;
    if window_s <= 0.0 || step_s <= 0.0 {
        return Err(SceneError::Invalid("window and step must be positive"));
    }
    scene.track.validate()?;

    let mut windows = Vec::new();
    for t_end in window_ends(scene.duration_s, window_s, step_s) {
        let t0 = t_end - window_s;
        let beats: Vec<f64> = scene
            .track
            .beat_times
            .iter()
            .copied()
            .filter(|&b| b >= t0 - 1e-12 && b <= t_end + 1e-12)
            .collect();
        let bpm = if beats.len() >= 2 {
            let span = beats.last().unwrap() - beats.first().unwrap();
            Some(60.0 * (beats.len() - 1) as f64 / span)
        } else {
            None
        };
        let still = !scene
            .track
            .motion_segments
            .iter()
            .any(|seg| seg.start_s < t_end && seg.end_s > t0);
        windows.push(WindowTruth {
            center_s: t_end - window_s / 2.0,
            bpm,
            still,
        });
    }

    let pairs = ((scene.duration_s * config.burst_rate).round() as usize) / 2;
    let offset = config.decimated_start_offset();
    let rate = config.decimated_rate();
    let times: Vec<f64> = (0..pairs).map(|p| offset + p as f64 / rate).collect();
    let displacement = times
        .iter()
        .map(|&t| synth_displacement(&scene.track, t))
        .collect();

    Ok(GroundTruth {
        windows,
        displacement,
        displacement_times: times,
    })
}

/// Beat times at a constant rate with optional per-interval jitter.
pub fn regular_beats(hr_bpm: f64, duration_s: f64, jitter: f64, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    let mut beats = Vec::new();
    let mut t = 0.3;
    while t < duration_s {
        beats.push(t);
        let base = 60.0 / hr_bpm;
        let j = if jitter > 0.0 {
            1.0 + jitter * (2.0 * rng.uniform() - 1.0)
        } else {
            1.0
        };
        t += base * j;
    }
    beats
}
