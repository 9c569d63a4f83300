//! Multi-resolution FFT bank.
//!
//! The pulse waveform is transformed seven ways: one full-length FFT, two
//! half-segment FFTs and four quarter-segment FFTs, every one zero-padded to
//! 1024 points so all rows share the same 0.87891 bpm bin granularity. The
//! magnitudes are cropped to bins 40..=228 (35.16-200.4 bpm, 189 bins).
//! Splitting the waveform into segments gives each row a different time
//! support, which is what lets the spectrum head reject non-stationary
//! interference.
//!
//! Forward and backward use the same explicit DFT tables over the cropped
//! bins, so the gradients are exact (|.| takes subgradient 0 at 0).

use thiserror::Error;

use crate::num::Real;

use super::layers::Batch;

/// Zero-padded transform length shared by the seven rows.
pub const FFT_LEN: usize = 1024;
/// First retained absolute bin (35.16 bpm).
pub const CROP_LO: usize = 40;
/// Last retained absolute bin, inclusive (200.4 bpm).
pub const CROP_HI: usize = 228;
/// Cropped band width.
pub const SPECTRUM_BINS: usize = CROP_HI - CROP_LO + 1;
/// The only profile rate the bin granularity contract holds for, Hz.
pub const REQUIRED_RATE_HZ: f64 = 15.0;
/// Number of rows: 1 full + 2 half + 4 quarter segments.
pub const BANK_ROWS: usize = 7;

/// Bin spacing in bpm at the required rate.
pub fn bin_spacing_bpm() -> f64 {
    REQUIRED_RATE_HZ / FFT_LEN as f64 * 60.0
}

/// Center bpm of cropped bin `k` (0-based within the 189-bin band).
pub fn bin_to_bpm(k: usize) -> f64 {
    (CROP_LO + k) as f64 * bin_spacing_bpm()
}

/// Continuous cropped-bin coordinate of a bpm value.
pub fn bpm_to_bin(bpm: f64) -> f64 {
    bpm / bin_spacing_bpm() - CROP_LO as f64
}

#[derive(Debug, Error, PartialEq)]
pub enum FftBankError {
    #[error("unsupported sample rate {0} Hz: the bin granularity contract requires 15 Hz")]
    UnsupportedRate(f64),
    #[error("pulse too short: {0} samples")]
    PulseTooShort(usize),
    #[error("pulse length {0} not divisible into half/quarter segments")]
    BadLength(usize),
}

/// DFT tables for the cropped band: angle(k_abs, n) = 2 pi k_abs n / 1024.
pub struct FftBankTables<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    max_n: usize,
}

impl<T: Real> FftBankTables<T> {
    pub fn new(max_n: usize) -> Self {
        let mut cos = Vec::with_capacity(SPECTRUM_BINS * max_n);
        let mut sin = Vec::with_capacity(SPECTRUM_BINS * max_n);
        for k in CROP_LO..=CROP_HI {
            for n in 0..max_n {
                let ang = 2.0 * std::f64::consts::PI * (k * n % FFT_LEN) as f64 / FFT_LEN as f64;
                cos.push(T::from_f64_lossy(ang.cos()));
                sin.push(T::from_f64_lossy(ang.sin()));
            }
        }
        FftBankTables { cos, sin, max_n }
    }

    #[inline]
    fn row(&self, k: usize) -> (&[T], &[T]) {
        let start = k * self.max_n;
        (
            &self.cos[start..start + self.max_n],
            &self.sin[start..start + self.max_n],
        )
    }
}

/// Segment offsets/lengths for a pulse of length `len`.
pub fn segments(len: usize) -> Result<[(usize, usize); BANK_ROWS], FftBankError> {
    if len < 8 {
        return Err(FftBankError::PulseTooShort(len));
    }
    if len % 4 != 0 || len > FFT_LEN {
        return Err(FftBankError::BadLength(len));
    }
    let h = len / 2;
    let q = len / 4;
    Ok([
        (0, len),
        (0, h),
        (h, h),
        (0, q),
        (q, q),
        (2 * q, q),
        (3 * q, q),
    ])
}

/// Cache of the complex spectra needed for the exact backward pass.
pub struct FftBankCache<T> {
    /// Per example, per row, per bin: (re, im, mag).
    spectra: Vec<(T, T, T)>,
}

/// Forward pass: `[n][1][len]` pulse -> `[n][7][189]` magnitude rows.
pub fn fft_bank_forward<T: Real>(
    pulse: &Batch<T>,
    sample_rate: f64,
    tables: &FftBankTables<T>,
) -> Result<(Batch<T>, FftBankCache<T>), FftBankError> {
    if (sample_rate - REQUIRED_RATE_HZ).abs() > 1e-9 {
        return Err(FftBankError::UnsupportedRate(sample_rate));
    }
    debug_assert_eq!(pulse.ch, 1);
    let segs = segments(pulse.len)?;
    let mut out = Batch::zeros(pulse.n, BANK_ROWS, SPECTRUM_BINS);
    let mut spectra = vec![(T::zero(), T::zero(), T::zero()); pulse.n * BANK_ROWS * SPECTRUM_BINS];
    for i in 0..pulse.n {
        let x = pulse.row(i, 0);
        for (row, &(off, seg_len)) in segs.iter().enumerate() {
            let seg = &x[off..off + seg_len];
            let o = out.row_mut(i, row);
            for k in 0..SPECTRUM_BINS {
                let (ct, st) = tables.row(k);
                let mut re = T::zero();
                let mut im = T::zero();
                for n in 0..seg_len {
                    re += seg[n] * ct[n];
                    im -= seg[n] * st[n];
                }
                let mag = (re * re + im * im).sqrt();
                o[k] = mag;
                spectra[(i * BANK_ROWS + row) * SPECTRUM_BINS + k] = (re, im, mag);
            }
        }
    }
    Ok((out, FftBankCache { spectra }))
}

/// Backward pass: gradient w.r.t. the input pulse.
pub fn fft_bank_backward<T: Real>(
    pulse_len: usize,
    n: usize,
    cache: &FftBankCache<T>,
    gout: &Batch<T>,
    tables: &FftBankTables<T>,
) -> Batch<T> {
    let segs = segments(pulse_len).expect("validated in forward");
    let mut gin = Batch::zeros(n, 1, pulse_len);
    for i in 0..n {
        for (row, &(off, seg_len)) in segs.iter().enumerate() {
            let g_row = gout.row(i, row).to_vec();
            let gi = gin.row_mut(i, 0);
            for k in 0..SPECTRUM_BINS {
                let (re, im, mag) = cache.spectra[(i * BANK_ROWS + row) * SPECTRUM_BINS + k];
                if mag <= T::zero() {
                    continue;
                }
                let g = g_row[k];
                if g == T::zero() {
                    continue;
                }
                let (ct, st) = tables.row(k);
                // d|X|/dx_n = (re cos + im (-sin)) / |X|
                let gre = g * re / mag;
                let gim = g * im / mag;
                for nn in 0..seg_len {
                    gi[off + nn] += gre * ct[nn] - gim * st[nn];
                }
            }
        }
    }
    gin
}
