//! Windowed orchestration: range profiles -> presence gate -> micro-motion
//! -> pulse network (or BPF baseline) -> HR series -> post-processing.
//!
//! The first estimate is emitted once a full window of data exists (60 s
//! sleep, 16 s meditation) and then every step (15 s / 4 s). Windows where
//! the user is absent or not still stay undetermined.

use thiserror::Error;

use crate::config::RangeProfileSeries;
use crate::frontend::{cfar_detect, clutter_filter, combine_power, stillness_segmented};
use crate::micromotion::{extract_micromotions, MicroMotionSet};
use crate::net::{pick_hr, PulseNet};
use crate::scene::WindowTruth;
use crate::session::RunConfig;
use crate::track::{postprocess, HrEntry, HrSeries, MetricsReport, Profile, TrackError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("series shorter than one {0:?} window")]
    TooShort(Profile),
    #[error("series rate {0} Hz is not the 15 Hz profile rate")]
    WrongRate(f64),
    #[error(transparent)]
    Frontend(#[from] crate::frontend::FrontendError),
    #[error(transparent)]
    MicroMotion(#[from] crate::micromotion::MicroMotionError),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

/// One analysis window: profile index range and its center time.
#[derive(Debug, Clone, Copy)]
pub struct WindowSlot {
    pub t0: usize,
    pub t1: usize,
    pub center_s: f64,
}

/// Window index ranges for a series under a profile. Window centers are on
/// the scene-time grid (step/2 + k*step), matching the ground-truth
/// windowing.
pub fn window_slots(series: &RangeProfileSeries, profile: Profile) -> Vec<WindowSlot> {
    let w = profile.window_samples();
    let step = profile.step_samples();
    let mut slots = Vec::new();
    let mut t0 = 0usize;
    while t0 + w <= series.len {
        slots.push(WindowSlot {
            t0,
            t1: t0 + w,
            center_s: (t0 + w / 2) as f64 / series.sample_rate,
        });
        t0 += step;
    }
    slots
}

/// Everything the per-window front end produces.
pub struct WindowAnalysis {
    pub center_s: f64,
    pub present: bool,
    pub still: bool,
    pub stillness_ratio: f64,
    pub range_bin: usize,
    pub motions: Option<MicroMotionSet>,
}

/// Runs clutter filtering, presence detection, stillness gating and
/// micro-motion extraction on one window of the series.
pub fn analyze_window(
    series: &RangeProfileSeries,
    slot: WindowSlot,
    run: &RunConfig,
    f0_hz: f64,
) -> Result<WindowAnalysis, PipelineError> {
    let window = series.slice_time(slot.t0, slot.t1);
    let filtered = clutter_filter(&window)?;
    let presence_cfg = run.presence();

    // Presence from the trailing detection window, refreshed per step.
    let detect_len = ((presence_cfg.detect_window_s * series.sample_rate).round() as usize)
        .min(filtered.len);
    let trailing = filtered.slice_time(filtered.len - detect_len, filtered.len);
    let report = cfar_detect(&combine_power(&trailing), &presence_cfg)?;
    if !report.present {
        return Ok(WindowAnalysis {
            center_s: slot.center_s,
            present: false,
            still: false,
            stillness_ratio: 0.0,
            range_bin: 0,
            motions: None,
        });
    }

    // Stillness over the whole window, judged per sub-segment.
    let (ratio, still) = match stillness_segmented(&filtered, report.range_bin, &presence_cfg) {
        Ok(v) => v,
        Err(crate::frontend::FrontendError::ZeroEnergy) => (0.0, false),
        Err(e) => return Err(e.into()),
    };
    if !still {
        return Ok(WindowAnalysis {
            center_s: slot.center_s,
            present: true,
            still: false,
            stillness_ratio: ratio,
            range_bin: report.range_bin,
            motions: None,
        });
    }

    let motions = extract_micromotions(&filtered, report.range_bin, f0_hz)?;
    Ok(WindowAnalysis {
        center_s: slot.center_s,
        present: true,
        still: true,
        stillness_ratio: ratio,
        range_bin: report.range_bin,
        motions: Some(motions),
    })
}

fn check_series(series: &RangeProfileSeries, profile: Profile) -> Result<(), PipelineError> {
    if (series.sample_rate - 15.0).abs() > 1e-9 {
        return Err(PipelineError::WrongRate(series.sample_rate));
    }
    if series.len < profile.window_samples() {
        return Err(PipelineError::TooShort(profile));
    }
    Ok(())
}

/// Full network pipeline over a series; returns the raw and post-processed
/// HR series.
pub fn process_series(
    series: &RangeProfileSeries,
    net: &mut PulseNet<f32>,
    run: &RunConfig,
    f0_hz: f64,
) -> Result<(HrSeries, HrSeries), PipelineError> {
    check_series(series, run.profile)?;
    let mut entries = Vec::new();
    for slot in window_slots(series, run.profile) {
        let analysis = analyze_window(series, slot, run, f0_hz)?;
        let entry = match analysis.motions {
            Some(motions) => {
                let spectrum = net.infer(&motions)?;
                let est = pick_hr(&spectrum, slot.center_s);
                HrEntry {
                    center_s: slot.center_s,
                    bpm: Some(est.bpm),
                    confidence: est.confidence,
                }
            }
            None => HrEntry {
                center_s: slot.center_s,
                bpm: None,
                confidence: 0.0,
            },
        };
        entries.push(entry);
    }
    let raw = HrSeries {
        entries,
        step_s: run.profile.step_s(),
        profile: run.profile,
    };
    let post = postprocess(&raw, run.theta_conf)?;
    Ok((raw, post))
}

/// BPF baseline over the same windows; PAR doubles as the confidence and the
/// PAR threshold as the confidence threshold, so post-processing treats both
/// chains identically.
pub fn process_series_baseline(
    series: &RangeProfileSeries,
    run: &RunConfig,
    f0_hz: f64,
) -> Result<(HrSeries, HrSeries), PipelineError> {
    check_series(series, run.profile)?;
    let mut entries = Vec::new();
    for slot in window_slots(series, run.profile) {
        let analysis = analyze_window(series, slot, run, f0_hz)?;
        let entry = match analysis.motions {
            Some(motions) => {
                let report = crate::baseline::baseline_hr(&motions, run.theta_par)?;
                HrEntry {
                    center_s: slot.center_s,
                    bpm: report.bpm,
                    confidence: report.par,
                }
            }
            None => HrEntry {
                center_s: slot.center_s,
                bpm: None,
                confidence: 0.0,
            },
        };
        entries.push(entry);
    }
    let raw = HrSeries {
        entries,
        step_s: run.profile.step_s(),
        profile: run.profile,
    };
    let post = postprocess(&raw, run.theta_par)?;
    Ok((raw, post))
}

/// Pairs a processed series with ground-truth windows. Windows without a
/// reference HR or overlapping gross motion are excluded from evaluation,
/// matching how motion periods are excluded from the accuracy assessment.
pub fn evaluation_pairs(
    series: &HrSeries,
    truth: &[WindowTruth],
) -> Result<Vec<(Option<f64>, f64)>, TrackError> {
    if series.entries.len() != truth.len() {
        return Err(TrackError::Misaligned);
    }
    let mut pairs = Vec::new();
    for (e, t) in series.entries.iter().zip(truth.iter()) {
        if (e.center_s - t.center_s).abs() > 1e-6 {
            return Err(TrackError::Misaligned);
        }
        if !t.still {
            continue;
        }
        if let Some(bpm_true) = t.bpm {
            pairs.push((e.bpm, bpm_true));
        }
    }
    Ok(pairs)
}

/// Metrics over pooled (estimate, truth) pairs from one or more sessions.
pub fn metrics_from_pairs(pairs: &[(Option<f64>, f64)]) -> Result<MetricsReport, TrackError> {
    if pairs.is_empty() {
        return Err(TrackError::NoSamples);
    }
    let recall = pairs.iter().filter(|(p, _)| p.is_some()).count() as f64 / pairs.len() as f64;
    let det: Vec<(f64, f64)> = pairs
        .iter()
        .filter_map(|(p, t)| p.map(|v| (*t, v)))
        .collect();
    if det.is_empty() {
        return Err(TrackError::NoSamples);
    }
    let n = det.len() as f64;
    let mut ae: Vec<f64> = det.iter().map(|(t, p)| (t - p).abs()).collect();
    let mut ape: Vec<f64> = det.iter().map(|(t, p)| (t - p).abs() / t).collect();
    let mae = ae.iter().sum::<f64>() / n;
    let mape = ape.iter().sum::<f64>() / n;
    ae.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ape.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p95 = |sorted: &[f64]| {
        let m = sorted.len();
        if m == 1 {
            return sorted[0];
        }
        let pos = 0.95 * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let mean_t = det.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ss_res: f64 = det.iter().map(|(t, p)| (t - p) * (t - p)).sum();
    let ss_tot: f64 = det.iter().map(|(t, _)| (t - mean_t) * (t - mean_t)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        return Err(TrackError::ConstantTruth);
    };
    Ok(MetricsReport {
        recall,
        mae_bpm: mae,
        mape,
        ae95_bpm: p95(&ae),
        ape95: p95(&ape),
        r2,
        n_samples: det.len(),
    })
}
