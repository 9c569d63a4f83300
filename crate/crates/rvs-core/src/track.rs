//! HR series post-processing and the metrics suite.
//!
//! Raw per-window estimates are refined in four steps: low-confidence
//! entries are discarded; gaps no longer than the median filter are linearly
//! interpolated from their neighbors; longer gaps become undetermined; a
//! median filter and then a Gaussian smoother run over each determined run.
//! Filter lengths follow the profile (sleep: 10 min median / 1 min Gaussian
//! at a 15 s step; meditation: 20 s / 20 s at a 4 s step).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("series steps are not uniform")]
    NonUniformStep,
    #[error("no samples to evaluate")]
    NoSamples,
    #[error("window centers do not align with the reference")]
    Misaligned,
    #[error("reference HR is constant; R^2 undefined")]
    ConstantTruth,
}

/// Windowing profile: window length, step, and post-processing lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Sleep,
    Meditation,
}

impl Profile {
    pub fn window_s(self) -> f64 {
        match self {
            Profile::Sleep => 60.0,
            Profile::Meditation => 16.0,
        }
    }

    pub fn step_s(self) -> f64 {
        match self {
            Profile::Sleep => 15.0,
            Profile::Meditation => 4.0,
        }
    }

    /// Median filter length in samples (10 min sleep, 20 s meditation).
    pub fn median_len(self) -> usize {
        match self {
            Profile::Sleep => (600.0 / self.step_s()) as usize,
            Profile::Meditation => (20.0 / self.step_s()) as usize,
        }
    }

    /// Gaussian smoother length in samples (1 min sleep, 20 s meditation).
    pub fn gauss_len(self) -> usize {
        match self {
            Profile::Sleep => (60.0 / self.step_s()) as usize,
            Profile::Meditation => (20.0 / self.step_s()) as usize,
        }
    }

    /// Window samples at the 15 Hz decimated rate.
    pub fn window_samples(self) -> usize {
        (self.window_s() * 15.0) as usize
    }

    /// Step samples at the 15 Hz decimated rate.
    pub fn step_samples(self) -> usize {
        (self.step_s() * 15.0) as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Sleep => "sleep",
            Profile::Meditation => "meditation",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sleep" => Ok(Profile::Sleep),
            "meditation" => Ok(Profile::Meditation),
            other => Err(format!("unknown profile '{other}'")),
        }
    }
}

/// One estimate in an HR series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrEntry {
    /// Window center, s.
    pub center_s: f64,
    /// HR in bpm; `None` marks an undetermined window.
    pub bpm: Option<f64>,
    pub confidence: f64,
}

/// Timestamped HR estimates at a uniform step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrSeries {
    pub entries: Vec<HrEntry>,
    pub step_s: f64,
    pub profile: Profile,
}

impl HrSeries {
    pub fn check_uniform(&self) -> Result<(), TrackError> {
        for w in self.entries.windows(2) {
            if (w[1].center_s - w[0].center_s - self.step_s).abs() > 1e-6 {
                return Err(TrackError::NonUniformStep);
            }
        }
        Ok(())
    }

    /// Fraction of determined entries.
    pub fn recall(&self) -> Result<f64, TrackError> {
        if self.entries.is_empty() {
            return Err(TrackError::NoSamples);
        }
        let det = self.entries.iter().filter(|e| e.bpm.is_some()).count();
        Ok(det as f64 / self.entries.len() as f64)
    }
}

/// Default confidence threshold (main peak at least 20% above the second).
pub const DEFAULT_THETA_CONF: f64 = 1.2;

/// Rejection, interpolation, median filtering and Gaussian smoothing.
pub fn postprocess(raw: &HrSeries, theta_conf: f64) -> Result<HrSeries, TrackError> {
    raw.check_uniform()?;
    let n = raw.entries.len();
    if n == 0 {
        return Ok(raw.clone());
    }
    let median_len = raw.profile.median_len();
    let gauss_len = raw.profile.gauss_len();

    // 1. Reject low-confidence entries.
    let mut vals: Vec<Option<f64>> = raw
        .entries
        .iter()
        .map(|e| match e.bpm {
            Some(v) if e.confidence >= theta_conf => Some(v),
            _ => None,
        })
        .collect();

    // 2./3. Interpolate interior gaps up to the median length; longer gaps
    // and edge gaps stay undetermined.
    let mut i = 0;
    while i < n {
        if vals[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && vals[i].is_none() {
            i += 1;
        }
        let end = i; // gap is [start, end)
        let gap = end - start;
        let left = start.checked_sub(1).and_then(|j| vals[j]);
        let right = if end < n { vals[end] } else { None };
        if gap <= median_len {
            if let (Some(a), Some(b)) = (left, right) {
                let span = (gap + 1) as f64;
                for (k, slot) in vals[start..end].iter_mut().enumerate() {
                    let frac = (k + 1) as f64 / span;
                    *slot = Some(a + (b - a) * frac);
                }
            }
        }
    }

    // 4. Median then Gaussian over each determined run.
    let mut out = vals.clone();
    let mut run_start = 0;
    while run_start < n {
        if out[run_start].is_none() {
            run_start += 1;
            continue;
        }
        let mut run_end = run_start;
        while run_end < n && out[run_end].is_some() {
            run_end += 1;
        }
        let run: Vec<f64> = vals[run_start..run_end].iter().map(|v| v.unwrap()).collect();
        let smoothed = gaussian_smooth(&median_filter(&run, median_len), gauss_len);
        for (k, v) in smoothed.into_iter().enumerate() {
            out[run_start + k] = Some(v);
        }
        run_start = run_end;
    }

    let entries = raw
        .entries
        .iter()
        .zip(out.into_iter())
        .map(|(e, v)| HrEntry {
            center_s: e.center_s,
            bpm: v,
            confidence: e.confidence,
        })
        .collect();
    Ok(HrSeries {
        entries,
        step_s: raw.step_s,
        profile: raw.profile,
    })
}

/// Centered median filter; the window shrinks at the run edges.
pub fn median_filter(xs: &[f64], len: usize) -> Vec<f64> {
    if xs.is_empty() || len <= 1 {
        return xs.to_vec();
    }
    let half_lo = len / 2;
    let half_hi = len - 1 - half_lo;
    let n = xs.len();
    let mut out = Vec::with_capacity(n);
    let mut window = Vec::with_capacity(len);
    for i in 0..n {
        let lo = i.saturating_sub(half_lo);
        let hi = (i + half_hi + 1).min(n);
        window.clear();
        window.extend_from_slice(&xs[lo..hi]);
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = window.len();
        out.push(if m % 2 == 1 {
            window[m / 2]
        } else {
            0.5 * (window[m / 2 - 1] + window[m / 2])
        });
    }
    out
}

/// Gaussian smoother with sigma = len/3, support +-len, reflect padding.
pub fn gaussian_smooth(xs: &[f64], len: usize) -> Vec<f64> {
    if xs.is_empty() || len == 0 {
        return xs.to_vec();
    }
    let sigma = len as f64 / 3.0;
    let support = len as i64;
    let kernel: Vec<f64> = (-support..=support)
        .map(|k| (-(k as f64) * (k as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let n = xs.len() as i64;
    let reflect = |idx: i64| -> f64 {
        // Reflect about the run boundaries.
        let mut j = idx;
        if n == 1 {
            return xs[0];
        }
        while j < 0 || j >= n {
            if j < 0 {
                j = -j;
            }
            if j >= n {
                j = 2 * (n - 1) - j;
            }
        }
        xs[j as usize]
    };
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (ki, k) in (-support..=support).enumerate() {
                acc += kernel[ki] * reflect(i + k);
            }
            acc / ksum
        })
        .collect()
}

/// The full accuracy report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recall: f64,
    pub mae_bpm: f64,
    pub mape: f64,
    pub ae95_bpm: f64,
    pub ape95: f64,
    pub r2: f64,
    pub n_samples: usize,
}

/// Reference values aligned with a series: window center -> bpm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub centers: Vec<f64>,
    pub bpm: Vec<f64>,
}

/// Recall against an aligned reference: determined / total.
pub fn recall(series: &HrSeries, reference: &Reference) -> Result<f64, TrackError> {
    align(series, reference)?;
    if series.entries.is_empty() {
        return Err(TrackError::NoSamples);
    }
    series.recall()
}

fn align(series: &HrSeries, reference: &Reference) -> Result<(), TrackError> {
    if series.entries.len() != reference.centers.len() {
        return Err(TrackError::Misaligned);
    }
    for (e, &c) in series.entries.iter().zip(reference.centers.iter()) {
        if (e.center_s - c).abs() > 1e-6 {
            return Err(TrackError::Misaligned);
        }
    }
    Ok(())
}

/// 95th-percentile by linear interpolation between order statistics.
fn percentile95(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = 0.95 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// MAE, MAPE, 95th-percentile AE/APE, R-squared and recall.
///
/// Undetermined entries are excluded from the error metrics and counted only
/// by the recall. R-squared may be negative and is returned as computed.
pub fn error_metrics(series: &HrSeries, reference: &Reference) -> Result<MetricsReport, TrackError> {
    align(series, reference)?;
    let pairs: Vec<(f64, f64)> = series
        .entries
        .iter()
        .zip(reference.bpm.iter())
        .filter_map(|(e, &t)| e.bpm.map(|p| (t, p)))
        .collect();
    if pairs.is_empty() {
        return Err(TrackError::NoSamples);
    }
    let n = pairs.len() as f64;
    let mut ae: Vec<f64> = pairs.iter().map(|(t, p)| (t - p).abs()).collect();
    let mut ape: Vec<f64> = pairs.iter().map(|(t, p)| (t - p).abs() / t).collect();
    let mae = ae.iter().sum::<f64>() / n;
    let mape = ape.iter().sum::<f64>() / n;
    ae.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ape.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ae95 = percentile95(&ae);
    let ape95 = percentile95(&ape);

    let mean_t = pairs.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ss_res: f64 = pairs.iter().map(|(t, p)| (t - p) * (t - p)).sum();
    let ss_tot: f64 = pairs.iter().map(|(t, _)| (t - mean_t) * (t - mean_t)).sum();
    if ss_tot <= 0.0 {
        return Err(TrackError::ConstantTruth);
    }
    let r2 = 1.0 - ss_res / ss_tot;

    Ok(MetricsReport {
        recall: series.recall()?,
        mae_bpm: mae,
        mape,
        ae95_bpm: ae95,
        ape95,
        r2,
        n_samples: pairs.len(),
    })
}
