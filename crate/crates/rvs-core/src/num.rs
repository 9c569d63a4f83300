//! Scalar abstraction for the numeric kernels.
//!
//! FFTs, filters and the network layers are written against [`Real`] so the
//! same code runs in `f32` (production weights, file payloads) and `f64`
//! (signal processing, finite-difference oracles).

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable by every numeric kernel in this crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Default + std::fmt::Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants and precomputed tables.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    /// Widening conversion to `f64` for reporting and cross-precision checks.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Mean of a slice; zero for an empty slice.
pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let mut acc = T::zero();
    for &x in xs {
        acc += x;
    }
    acc / T::from_usize(xs.len()).unwrap()
}

/// Population variance about the mean; zero for slices shorter than 2.
pub fn variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let mut acc = T::zero();
    for &x in xs {
        let d = x - m;
        acc += d * d;
    }
    acc / T::from_usize(xs.len()).unwrap()
}

/// Pearson correlation of two equal-length series.
///
/// Returns `None` when either series is degenerate (zero variance).
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Option<T> {
    assert_eq!(a.len(), b.len(), "series length mismatch");
    if a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = T::zero();
    let mut saa = T::zero();
    let mut sbb = T::zero();
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= T::zero() || sbb <= T::zero() {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Complex mean of a slice.
pub fn complex_mean<T: Real>(xs: &[Complex<T>]) -> Complex<T> {
    if xs.is_empty() {
        return Complex::new(T::zero(), T::zero());
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    for &x in xs {
        acc += x;
    }
    let n = T::from_usize(xs.len()).unwrap();
    Complex::new(acc.re / n, acc.im / n)
}

/// Removes the least-squares line `a + b·i` from `xs` in place.
///
/// The fitted line contains the constant, so the output is exactly zero-mean
/// up to rounding.
pub fn detrend_linear<T: Real>(xs: &mut [T]) {
    let n = xs.len();
    if n < 2 {
        for x in xs.iter_mut() {
            *x = T::zero();
        }
        return;
    }
    let nf = T::from_usize(n).unwrap();
    // Centered index keeps the normal equations diagonal.
    let mid = (nf - T::one()) / T::from_f64_lossy(2.0);
    let my = mean(xs);
    let mut stt = T::zero();
    let mut sty = T::zero();
    for (i, &y) in xs.iter().enumerate() {
        let t = T::from_usize(i).unwrap() - mid;
        stt += t * t;
        sty += t * (y - my);
    }
    let slope = if stt > T::zero() { sty / stt } else { T::zero() };
    for (i, y) in xs.iter_mut().enumerate() {
        let t = T::from_usize(i).unwrap() - mid;
        *y = *y - my - slope * t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        assert!((mean(&xs) - 2.5).abs() < 1e-15);
        assert!((variance(&xs) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn pearson_perfect_and_degenerate() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [2.0f64, 4.0, 6.0];
        assert!((pearson(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = [5.0f64, 5.0, 5.0];
        assert!(pearson(&a, &c).is_none());
    }

    #[test]
    fn detrend_removes_line() {
        let mut xs: Vec<f64> = (0..100).map(|i| 3.0 + 0.25 * i as f64).collect();
        detrend_linear(&mut xs);
        for x in &xs {
            assert!(x.abs() < 1e-9, "residual {x}");
        }
    }

    #[test]
    fn detrend_output_zero_mean() {
        let mut xs: Vec<f64> = (0..64)
            .map(|i| (i as f64 * 0.37).sin() + 0.1 * i as f64)
            .collect();
        detrend_linear(&mut xs);
        assert!(mean(&xs).abs() < 1e-12);
    }
}
