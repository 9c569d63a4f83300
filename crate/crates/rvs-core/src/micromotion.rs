//! Micro-motion extraction around the detected user range.
//!
//! Sixteen range bins are processed independently: the three receiver
//! channels are combined by maximum ratio combining (dominant eigenvector of
//! the 3x3 sample covariance, found by power iteration), a circle is fitted
//! to the combined complex trajectory, and the unwrapped angle about the
//! circle center scales to displacement by c/(4 pi f0).

use num_complex::Complex;
use thiserror::Error;

use crate::config::RangeProfileSeries;
use crate::num::{detrend_linear, Real};

#[derive(Debug, Error, PartialEq)]
pub enum MicroMotionError {
    #[error("need at least {0} samples")]
    InsufficientData(usize),
    #[error("degenerate matrix (zero or near-zero)")]
    DegenerateMatrix,
    #[error("power iteration did not converge")]
    NoConvergence,
    #[error("singular circle fit (collinear or coincident points)")]
    SingularFit,
    #[error("sample coincides with circle center; angle undefined")]
    UndefinedAngle,
    #[error("micromotion requires exactly 3 receivers, got {0}")]
    WrongReceiverCount(usize),
}

/// Minimum samples for covariance estimation.
pub const MIN_COVARIANCE_SAMPLES: usize = 8;

/// Number of range bins extracted around the detected user distance.
pub const MICROMOTION_BINS: usize = 16;

/// Hermitian 3x3 matrix, row-major.
pub type Herm3<T> = [[Complex<T>; 3]; 3];

/// Least-squares circle through a complex trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleFit<T: Real> {
    pub center: Complex<T>,
    pub radius: T,
    /// RMS of the squared-modulus residuals the fit minimizes.
    pub residual: T,
}

/// The extracted displacement waveforms, one per range bin.
#[derive(Debug, Clone)]
pub struct MicroMotionSet {
    /// Detrended displacement in meters, `MICROMOTION_BINS` rows.
    pub waveforms: Vec<Vec<f64>>,
    pub bin_indices: Vec<usize>,
    pub sample_rate: f64,
    /// Set when the requested neighborhood had to be clamped to the profile.
    pub clamped: bool,
}

/// Sample covariance of mean-removed stacked receiver signals:
/// Q = (1/L) sum (x - mean)(x - mean)^H.
pub fn covariance<T: Real>(x: &[[Complex<T>; 3]]) -> Result<Herm3<T>, MicroMotionError> {
    let l = x.len();
    if l < MIN_COVARIANCE_SAMPLES {
        return Err(MicroMotionError::InsufficientData(MIN_COVARIANCE_SAMPLES));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut mean = [zero; 3];
    for s in x {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += *v;
        }
    }
    let inv_l = T::one() / T::from_usize(l).unwrap();
    for m in mean.iter_mut() {
        *m = Complex::new(m.re * inv_l, m.im * inv_l);
    }

    let mut q = [[zero; 3]; 3];
    for s in x {
        let d = [s[0] - mean[0], s[1] - mean[1], s[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                q[i][j] += d[i] * d[j].conj();
            }
        }
    }
    for row in q.iter_mut() {
        for v in row.iter_mut() {
            *v = Complex::new(v.re * inv_l, v.im * inv_l);
        }
    }
    Ok(q)
}

fn mat_vec<T: Real>(q: &Herm3<T>, v: &[Complex<T>; 3]) -> [Complex<T>; 3] {
    let mut out = [Complex::new(T::zero(), T::zero()); 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += q[i][j] * v[j];
        }
    }
    out
}

fn norm3<T: Real>(v: &[Complex<T>; 3]) -> T {
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}

/// Fixes the global phase so the first component above threshold is real
/// and positive.
fn fix_phase<T: Real>(v: &mut [Complex<T>; 3]) {
    let thresh = T::from_f64_lossy(1e-12) * norm3(v);
    for i in 0..3 {
        let mag = v[i].norm();
        if mag > thresh {
            let rot = v[i].conj() / mag;
            for w in v.iter_mut() {
                *w = *w * rot;
            }
            return;
        }
    }
}

/// Dominant eigenvector of a Hermitian PSD 3x3 matrix via power iteration.
///
/// Starts from (1,1,1)/sqrt(3), runs at most `max_iters` iterations and
/// stops when successive iterates differ by less than `tol`.
pub fn dominant_eigvec<T: Real>(
    q: &Herm3<T>,
    max_iters: usize,
    tol: T,
) -> Result<[Complex<T>; 3], MicroMotionError> {
    let trace = q[0][0].re + q[1][1].re + q[2][2].re;
    if !(trace > T::zero()) {
        return Err(MicroMotionError::DegenerateMatrix);
    }
    let s = T::one() / T::from_f64_lossy(3.0).sqrt();
    let mut v = [
        Complex::new(s, T::zero()),
        Complex::new(s, T::zero()),
        Complex::new(s, T::zero()),
    ];
    fix_phase(&mut v);
    for _ in 0..max_iters {
        let mut next = mat_vec(q, &v);
        let n = norm3(&next);
        if !(n > T::zero()) {
            // Start vector in the null space; nudge off it.
            next = [
                Complex::new(T::one(), T::zero()),
                Complex::new(T::zero(), T::one()),
                Complex::new(-T::one(), T::zero()),
            ];
        }
        let n = norm3(&next);
        for w in next.iter_mut() {
            *w = Complex::new(w.re / n, w.im / n);
        }
        fix_phase(&mut next);
        let diff = ((next[0] - v[0]).norm_sqr()
            + (next[1] - v[1]).norm_sqr()
            + (next[2] - v[2]).norm_sqr())
        .sqrt();
        v = next;
        if diff < tol {
            return Ok(v);
        }
    }
    Err(MicroMotionError::NoConvergence)
}

/// Default power-iteration budget.
pub const POWER_ITER_MAX: usize = 100;

/// Default power-iteration convergence threshold.
pub fn power_iter_tol<T: Real>() -> T {
    T::from_f64_lossy(1e-10)
}

/// Maximum ratio combining: y(l) = w^H x(l).
pub fn mrc_combine<T: Real>(x: &[[Complex<T>; 3]], w: &[Complex<T>; 3]) -> Vec<Complex<T>> {
    x.iter()
        .map(|s| w[0].conj() * s[0] + w[1].conj() * s[1] + w[2].conj() * s[2])
        .collect()
}

/// Kasa-form closed-form circle fit minimizing sum(|y - eta|^2 - rho)^2
/// over center eta and squared radius rho; exact on noiseless circles.
pub fn fit_circle<T: Real>(y: &[Complex<T>]) -> Result<CircleFit<T>, MicroMotionError> {
    if y.len() < 3 {
        return Err(MicroMotionError::SingularFit);
    }
    // Center the data first: improves conditioning and makes the fit
    // translate exactly with the data.
    let mean = crate::num::complex_mean(y);
    let pts: Vec<Complex<T>> = y.iter().map(|p| p - mean).collect();

    // Normal equations for w = 2 a c_a + 2 b c_b + q with w = a^2 + b^2.
    let mut s = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for p in &pts {
        let (a, b) = (p.re, p.im);
        let w = a * a + b * b;
        let row = [a + a, b + b, T::one()];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * w;
        }
    }
    let sol = solve3(&mut s, &mut rhs)?;
    let center_local = Complex::new(sol[0], sol[1]);
    let rho = sol[2] + center_local.norm_sqr();
    if !(rho >= T::zero()) || !rho.is_finite() {
        return Err(MicroMotionError::SingularFit);
    }
    let radius = rho.sqrt();
    let mut res = T::zero();
    for p in &pts {
        let d = (p - center_local).norm_sqr() - rho;
        res += d * d;
    }
    let residual = (res / T::from_usize(pts.len()).unwrap()).sqrt();
    Ok(CircleFit {
        center: center_local + mean,
        radius,
        residual,
    })
}

/// Gaussian elimination with partial pivoting for the 3x3 normal equations.
fn solve3<T: Real>(a: &mut [[T; 3]; 3], b: &mut [T; 3]) -> Result<[T; 3], MicroMotionError> {
    // Scale-aware singularity threshold.
    let mut scale = T::zero();
    for row in a.iter() {
        for v in row.iter() {
            scale = scale.max(v.abs());
        }
    }
    let tiny = T::from_f64_lossy(1e-12) * scale.max(T::one());
    for col in 0..3 {
        let mut pivot = col;
        for r in col + 1..3 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() <= tiny {
            return Err(MicroMotionError::SingularFit);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for c in col + 1..3 {
            acc = acc - a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Unwraps radian phases so successive differences stay below pi.
pub fn unwrap_phase<T: Real>(angles: &mut [T]) {
    let pi = T::PI();
    let tau = T::TAU();
    let mut offset = T::zero();
    for i in 1..angles.len() {
        let raw = angles[i] + offset;
        let mut d = raw - angles[i - 1];
        while d > pi {
            offset -= tau;
            d -= tau;
        }
        while d < -pi {
            offset += tau;
            d += tau;
        }
        angles[i] = angles[i - 1] + d;
    }
}

/// Displacement from the unwrapped angle about the circle center:
/// d(l) = c/(4 pi f0) * unwrap(angle(y(l) - eta)).
pub fn extract_phase<T: Real>(
    y: &[Complex<T>],
    fit: &CircleFit<T>,
    f0_hz: f64,
) -> Result<Vec<T>, MicroMotionError> {
    let scale = T::from_f64_lossy(crate::SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f0_hz));
    let tiny = T::from_f64_lossy(1e-300);
    let mut angles = Vec::with_capacity(y.len());
    for p in y {
        let d = p - fit.center;
        if d.norm_sqr() <= tiny {
            return Err(MicroMotionError::UndefinedAngle);
        }
        angles.push(d.im.atan2(d.re));
    }
    unwrap_phase(&mut angles);
    for a in angles.iter_mut() {
        *a *= scale;
    }
    Ok(angles)
}

/// Runs the full per-bin chain over the 16 bins around `center_bin`
/// (center-7 ... center+8) and detrends each waveform.
///
/// Bins whose signal is degenerate (no energy, singular fit) yield a zero
/// waveform rather than failing the whole set.
pub fn extract_micromotions(
    series: &RangeProfileSeries,
    center_bin: usize,
    f0_hz: f64,
) -> Result<MicroMotionSet, MicroMotionError> {
    if series.rx_count != 3 {
        return Err(MicroMotionError::WrongReceiverCount(series.rx_count));
    }
    if series.len < MIN_COVARIANCE_SAMPLES {
        return Err(MicroMotionError::InsufficientData(MIN_COVARIANCE_SAMPLES));
    }
    let half_lo = MICROMOTION_BINS / 2 - 1; // 7 below, 8 above
    let mut first = center_bin as i64 - half_lo as i64;
    let mut clamped = false;
    if first < 0 {
        first = 0;
        clamped = true;
    }
    if first as usize + MICROMOTION_BINS > series.bins {
        first = series.bins as i64 - MICROMOTION_BINS as i64;
        clamped = true;
        if first < 0 {
            return Err(MicroMotionError::InsufficientData(MICROMOTION_BINS));
        }
    }
    let first = first as usize;

    let mut waveforms = Vec::with_capacity(MICROMOTION_BINS);
    let mut bin_indices = Vec::with_capacity(MICROMOTION_BINS);
    for offset in 0..MICROMOTION_BINS {
        let bin = first + offset;
        bin_indices.push(bin);
        let stacked: Vec<[num_complex::Complex<f64>; 3]> = (0..series.len)
            .map(|t| {
                [
                    series.get(t, 0, bin),
                    series.get(t, 1, bin),
                    series.get(t, 2, bin),
                ]
            })
            .collect();
        let waveform = extract_bin_waveform(&stacked, f0_hz).unwrap_or_else(|| vec![0.0; series.len]);
        waveforms.push(waveform);
    }
    Ok(MicroMotionSet {
        waveforms,
        bin_indices,
        sample_rate: series.sample_rate,
        clamped,
    })
}

fn extract_bin_waveform(
    stacked: &[[num_complex::Complex<f64>; 3]],
    f0_hz: f64,
) -> Option<Vec<f64>> {
    let q = covariance(stacked).ok()?;
    let w = dominant_eigvec(&q, POWER_ITER_MAX, power_iter_tol::<f64>()).ok()?;
    let y = mrc_combine(stacked, &w);
    let fit = fit_circle(&y).ok()?;
    let mut d = extract_phase(&y, &fit, f0_hz).ok()?;
    detrend_linear(&mut d);
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{wavelength, RadarConfig};
    use crate::num::pearson;
    use crate::rng::Rng;
    use crate::scene::{regular_beats, synth_decimated, SceneSpec, VitalTrack};

    type C64 = Complex<f64>;

    fn rand_c(rng: &mut Rng) -> C64 {
        C64::new(rng.normal(), rng.normal())
    }

    // ---- covariance ----

    #[test]
    fn covariance_constant_input_is_zero() {
        let x = vec![[C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)]; 20];
        let q = covariance(&x).unwrap();
        for row in &q {
            for v in row {
                assert!(v.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn covariance_rank_one_structure() {
        let mut rng = Rng::new(5);
        let v = [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)];
        let s: Vec<f64> = (0..64).map(|i| (i as f64 * 0.4).sin()).collect();
        let x: Vec<[C64; 3]> = s.iter().map(|&a| [v[0] * a, v[1] * a, v[2] * a]).collect();
        let q = covariance(&x).unwrap();
        let var = crate::num::variance(&s);
        for i in 0..3 {
            for j in 0..3 {
                let expect = v[i] * v[j].conj() * var;
                assert!((q[i][j] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn covariance_matches_brute_force_oracle() {
        let mut rng = Rng::new(17);
        let x: Vec<[C64; 3]> = (0..50)
            .map(|_| [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)])
            .collect();
        let q = covariance(&x).unwrap();

        // Brute-force double loop, element by element.
        let l = x.len() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let mut mi = C64::new(0.0, 0.0);
                let mut mj = C64::new(0.0, 0.0);
                for s in &x {
                    mi += s[i];
                    mj += s[j];
                }
                mi /= l;
                mj /= l;
                let mut acc = C64::new(0.0, 0.0);
                for s in &x {
                    acc += (s[i] - mi) * (s[j] - mj).conj();
                }
                acc /= l;
                assert!((q[i][j] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_hermitian_psd() {
        let mut rng = Rng::new(23);
        for _ in 0..50 {
            let x: Vec<[C64; 3]> = (0..30)
                .map(|_| [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)])
                .collect();
            let q = covariance(&x).unwrap();
            let mut trace = 0.0;
            for i in 0..3 {
                trace += q[i][i].re;
                for j in 0..3 {
                    assert!((q[i][j] - q[j][i].conj()).norm() < 1e-12);
                }
            }
            // PSD: quadratic form non-negative for random probes.
            for _ in 0..10 {
                let v = [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)];
                let qv = mat_vec(&q, &v);
                let quad = (v[0].conj() * qv[0] + v[1].conj() * qv[1] + v[2].conj() * qv[2]).re;
                assert!(quad >= -1e-12 * trace);
            }
        }
    }

    #[test]
    fn covariance_requires_min_samples() {
        let x = vec![[C64::new(0.0, 0.0); 3]; 7];
        assert_eq!(
            covariance(&x).unwrap_err(),
            MicroMotionError::InsufficientData(8)
        );
    }

    // ---- dominant eigenvector ----

    /// Analytic 3x3 Hermitian eigensolver used only as a test oracle:
    /// eigenvalues by the trigonometric solution of the characteristic
    /// polynomial, eigenvector by complex cross product of two rows.
    pub fn eig3_oracle(q: &Herm3<f64>) -> (f64, [C64; 3]) {
        let trace = q[0][0].re + q[1][1].re + q[2][2].re;
        let m = trace / 3.0;
        let mut b = *q;
        for i in 0..3 {
            b[i][i] -= m;
        }
        let mut p2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                p2 += b[i][j].norm_sqr();
            }
        }
        let p = (p2 / 6.0).sqrt();
        let lambda_max = if p < 1e-300 {
            m
        } else {
            // det(B / p)
            let c = |i: usize, j: usize| b[i][j] / p;
            let det = (c(0, 0) * (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1))
                - c(0, 1) * (c(1, 0) * c(2, 2) - c(1, 2) * c(2, 0))
                + c(0, 2) * (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0)))
                .re;
            let r = (det / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            m + 2.0 * p * phi.cos()
        };

        // Null vector of (Q - lambda I) via bilinear cross products.
        let mut a = *q;
        for i in 0..3 {
            a[i][i] -= lambda_max;
        }
        let cross = |u: &[C64; 3], v: &[C64; 3]| {
            [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ]
        };
        let rows = [a[0], a[1], a[2]];
        let mut best = cross(&rows[0], &rows[1]);
        for pair in [(0usize, 2usize), (1, 2)] {
            let cand = cross(&rows[pair.0], &rows[pair.1]);
            if norm3(&cand) > norm3(&best) {
                best = cand;
            }
        }
        let n = norm3(&best);
        for v in best.iter_mut() {
            *v /= n;
        }
        (lambda_max, best)
    }

    fn random_psd(rng: &mut Rng, max_ratio: f64) -> Herm3<f64> {
        // Controlled spectrum: lambda_1 = 1, others below max_ratio, with a
        // random unitary from QR-free Gram-Schmidt of random vectors.
        let l1 = 1.0;
        let l2 = rng.uniform_in(0.0, max_ratio);
        let l3 = rng.uniform_in(0.0, l2.min(max_ratio));
        let mut u = [[C64::new(0.0, 0.0); 3]; 3];
        loop {
            for row in u.iter_mut() {
                for v in row.iter_mut() {
                    *v = rand_c(rng);
                }
            }
            // Gram-Schmidt columns.
            let mut ok = true;
            for c in 0..3 {
                for prev in 0..c {
                    let mut dot = C64::new(0.0, 0.0);
                    for r in 0..3 {
                        dot += u[r][prev].conj() * u[r][c];
                    }
                    for r in 0..3 {
                        let sub = dot * u[r][prev];
                        u[r][c] -= sub;
                    }
                }
                let mut n = 0.0;
                for r in 0..3 {
                    n += u[r][c].norm_sqr();
                }
                let n = n.sqrt();
                if n < 1e-6 {
                    ok = false;
                    break;
                }
                for r in 0..3 {
                    u[r][c] /= n;
                }
            }
            if ok {
                break;
            }
        }
        let ls = [l1, l2, l3];
        let mut q = [[C64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, &lk) in ls.iter().enumerate() {
                    q[i][j] += u[i][k] * u[j][k].conj() * lk;
                }
            }
        }
        // Symmetrize against rounding.
        for i in 0..3 {
            q[i][i] = C64::new(q[i][i].re, 0.0);
            for j in i + 1..3 {
                let h = (q[i][j] + q[j][i].conj()) * 0.5;
                q[i][j] = h;
                q[j][i] = h.conj();
            }
        }
        q
    }

    #[test]
    fn eigvec_diagonal_case() {
        let mut q = [[C64::new(0.0, 0.0); 3]; 3];
        q[0][0] = C64::new(3.0, 0.0);
        q[1][1] = C64::new(2.0, 0.0);
        q[2][2] = C64::new(1.0, 0.0);
        let w = dominant_eigvec(&q, POWER_ITER_MAX, 1e-10).unwrap();
        assert!((w[0].re - 1.0).abs() < 1e-8);
        assert!(w[1].norm() < 1e-7);
        assert!(w[2].norm() < 1e-7);
    }

    #[test]
    fn eigvec_rank_one_case() {
        let mut rng = Rng::new(31);
        let v = [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)];
        let n = norm3(&v);
        let v = [v[0] / n, v[1] / n, v[2] / n];
        let mut q = [[C64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                q[i][j] = v[i] * v[j].conj();
            }
        }
        let w = dominant_eigvec(&q, POWER_ITER_MAX, 1e-12).unwrap();
        let mut dot = C64::new(0.0, 0.0);
        for i in 0..3 {
            dot += w[i].conj() * v[i];
        }
        assert!((dot.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigvec_matches_characteristic_polynomial_oracle() {
        // Eigen-gap bounded away from 1 so the fixed 100-iteration budget
        // reaches the 1e-10 successive-difference stop.
        let mut rng = Rng::new(404);
        for trial in 0..100 {
            let q = random_psd(&mut rng, 0.7);
            let w = dominant_eigvec(&q, POWER_ITER_MAX, 1e-12).unwrap();
            let (_, oracle) = eig3_oracle(&q);
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..3 {
                dot += w[i].conj() * oracle[i];
            }
            let cos = dot.norm();
            assert!(cos > 1.0 - 1e-8, "trial {trial}: cos {cos}");
        }
    }

    #[test]
    fn eigvec_zero_matrix_degenerate() {
        let q = [[C64::new(0.0, 0.0); 3]; 3];
        assert_eq!(
            dominant_eigvec(&q, POWER_ITER_MAX, 1e-10).unwrap_err(),
            MicroMotionError::DegenerateMatrix
        );
    }

    #[test]
    fn eigvec_satisfies_eigen_equation() {
        let mut rng = Rng::new(7);
        let q = random_psd(&mut rng, 0.6);
        let w = dominant_eigvec(&q, POWER_ITER_MAX, 1e-12).unwrap();
        let qw = mat_vec(&q, &w);
        let lambda = (w[0].conj() * qw[0] + w[1].conj() * qw[1] + w[2].conj() * qw[2]).re;
        for i in 0..3 {
            assert!((qw[i] - w[i] * lambda).norm() < 1e-8 * lambda.abs().max(1.0));
        }
        assert!((norm3(&w) - 1.0).abs() < 1e-12);
    }

    // ---- MRC ----

    #[test]
    fn mrc_unit_vector_selects_receiver() {
        let mut rng = Rng::new(9);
        let x: Vec<[C64; 3]> = (0..16)
            .map(|_| [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)])
            .collect();
        let e1 = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let y = mrc_combine(&x, &e1);
        for (out, s) in y.iter().zip(x.iter()) {
            assert_eq!(*out, s[0]);
        }
    }

    #[test]
    fn mrc_rank_one_recovers_scaled_source() {
        let mut rng = Rng::new(13);
        let v = [rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng)];
        let nv = norm3(&v);
        let w = [v[0] / nv, v[1] / nv, v[2] / nv];
        let s: Vec<C64> = (0..32).map(|_| rand_c(&mut rng)).collect();
        let x: Vec<[C64; 3]> = s.iter().map(|&a| [v[0] * a, v[1] * a, v[2] * a]).collect();
        let y = mrc_combine(&x, &w);
        for (out, &a) in y.iter().zip(s.iter()) {
            assert!((out - a * nv).norm() < 1e-12);
        }
    }

    #[test]
    fn mrc_snr_at_least_best_receiver() {
        let mut rng = Rng::new(77);
        // Known clean source, rank-1 steering, additive noise.
        let v = [
            C64::new(1.0, 0.0),
            C64::new(0.6, 0.5),
            C64::new(-0.3, 0.8),
        ];
        let clean: Vec<C64> = (0..400)
            .map(|i| {
                let ang = 0.15 * i as f64;
                C64::new(ang.cos(), ang.sin())
            })
            .collect();
        let sigma = 0.3;
        let noise: Vec<[C64; 3]> = (0..clean.len())
            .map(|_| {
                [
                    rand_c(&mut rng) * sigma,
                    rand_c(&mut rng) * sigma,
                    rand_c(&mut rng) * sigma,
                ]
            })
            .collect();
        let x: Vec<[C64; 3]> = clean
            .iter()
            .zip(noise.iter())
            .map(|(&s, n)| [v[0] * s + n[0], v[1] * s + n[1], v[2] * s + n[2]])
            .collect();
        let q = covariance(&x).unwrap();
        let w = dominant_eigvec(&q, POWER_ITER_MAX, 1e-10).unwrap();

        let sig_out: f64 = mrc_combine(
            &clean.iter().map(|&s| [v[0] * s, v[1] * s, v[2] * s]).collect::<Vec<_>>(),
            &w,
        )
        .iter()
        .map(|z| z.norm_sqr())
        .sum();
        let noise_out: f64 = mrc_combine(&noise, &w).iter().map(|z| z.norm_sqr()).sum();
        let snr_mrc = sig_out / noise_out;

        for m in 0..3 {
            let sig_m: f64 = clean.iter().map(|&s| (v[m] * s).norm_sqr()).sum();
            let noise_m: f64 = noise.iter().map(|n| n[m].norm_sqr()).sum();
            let snr_m = sig_m / noise_m;
            assert!(
                snr_mrc >= snr_m * 0.99,
                "receiver {m}: {snr_m} vs mrc {snr_mrc}"
            );
        }
    }

    // ---- circle fit ----

    #[test]
    fn circle_fit_generate_and_recover() {
        let mut rng = Rng::new(1001);
        for trial in 0..1000 {
            let center = C64::new(rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0));
            let radius = rng.uniform_in(0.1, 4.0);
            let n = 12 + rng.below(20);
            let y: Vec<C64> = (0..n)
                .map(|i| {
                    let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64
                        + rng.uniform_in(0.0, 0.3);
                    center + C64::new(ang.cos(), ang.sin()) * radius
                })
                .collect();
            let fit = fit_circle(&y).unwrap();
            let scale = radius.max(center.norm());
            assert!(
                (fit.center - center).norm() < 1e-9 * scale,
                "trial {trial}: center off by {}",
                (fit.center - center).norm()
            );
            assert!((fit.radius - radius).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn circle_fit_translation_equivariance() {
        let mut rng = Rng::new(55);
        let y: Vec<C64> = (0..24)
            .map(|i| {
                let ang = 0.26 * i as f64;
                C64::new(1.5, -0.7) + C64::new(ang.cos(), ang.sin()) * 0.8
                    + rand_c(&mut rng) * 0.01
            })
            .collect();
        let delta = C64::new(-3.2, 4.1);
        let shifted: Vec<C64> = y.iter().map(|p| p + delta).collect();
        let f0 = fit_circle(&y).unwrap();
        let f1 = fit_circle(&shifted).unwrap();
        assert!((f1.center - (f0.center + delta)).norm() < 1e-9);
        assert!((f1.radius - f0.radius).abs() < 1e-9);
    }

    #[test]
    fn circle_fit_rotation_equivariance() {
        let y: Vec<C64> = (0..17)
            .map(|i| {
                let ang = 0.3 * i as f64;
                C64::new(2.0, 1.0) + C64::new(ang.cos(), ang.sin()) * 1.3
            })
            .collect();
        let rot = C64::new(0.6, 0.8); // unit modulus
        let rotated: Vec<C64> = y.iter().map(|p| p * rot).collect();
        let f0 = fit_circle(&y).unwrap();
        let f1 = fit_circle(&rotated).unwrap();
        assert!((f1.center - f0.center * rot).norm() < 1e-9);
        assert!((f1.radius - f0.radius).abs() < 1e-9);
    }

    #[test]
    fn circle_fit_degenerate_inputs() {
        // Coincident points.
        let coincident = vec![C64::new(1.0, 1.0); 3];
        assert_eq!(
            fit_circle(&coincident).unwrap_err(),
            MicroMotionError::SingularFit
        );
        // Collinear points.
        let collinear: Vec<C64> = (0..10).map(|i| C64::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(
            fit_circle(&collinear).unwrap_err(),
            MicroMotionError::SingularFit
        );
        // Too few points.
        assert_eq!(
            fit_circle(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap_err(),
            MicroMotionError::SingularFit
        );
    }

    // ---- phase extraction ----

    #[test]
    fn phase_ramp_oracle() {
        let f0 = 60.75e9;
        let fit = CircleFit {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
            residual: 0.0,
        };
        let y: Vec<C64> = (0..200)
            .map(|l| {
                let ang = 0.2 * l as f64;
                C64::new(ang.cos(), ang.sin())
            })
            .collect();
        let d = extract_phase(&y, &fit, f0).unwrap();
        let slope = crate::SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f0) * 0.2;
        for (l, &v) in d.iter().enumerate() {
            assert!((v - slope * l as f64).abs() < 1e-12 * (1.0 + slope * l as f64));
        }
    }

    #[test]
    fn phase_constant_input() {
        let fit = CircleFit {
            center: C64::new(0.5, -0.5),
            radius: 1.0,
            residual: 0.0,
        };
        let y = vec![C64::new(1.5, 0.5); 20];
        let d = extract_phase(&y, &fit, 60.75e9).unwrap();
        for w in d.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn phase_full_turn_is_half_wavelength() {
        let config = RadarConfig::default();
        let f0 = config.center_frequency();
        let lambda = wavelength(&config);
        let fit = CircleFit {
            center: C64::new(0.0, 0.0),
            radius: 1.0,
            residual: 0.0,
        };
        let n = 64;
        let y: Vec<C64> = (0..=n)
            .map(|l| {
                let ang = 2.0 * std::f64::consts::PI * l as f64 / n as f64;
                C64::new(ang.cos(), ang.sin())
            })
            .collect();
        let d = extract_phase(&y, &fit, f0).unwrap();
        let excursion = d.last().unwrap() - d[0];
        assert!((excursion - lambda / 2.0).abs() < 1e-12);
        assert!((lambda / 2.0 - 2.468e-3).abs() < 1e-6);
    }

    #[test]
    fn phase_center_hit_is_error() {
        let fit = CircleFit {
            center: C64::new(1.0, 1.0),
            radius: 1.0,
            residual: 0.0,
        };
        let y = vec![C64::new(2.0, 1.0), C64::new(1.0, 1.0)];
        assert_eq!(
            extract_phase(&y, &fit, 60.75e9).unwrap_err(),
            MicroMotionError::UndefinedAngle
        );
    }

    #[test]
    fn phase_amplitude_invariant_to_positive_scaling() {
        let y: Vec<C64> = (0..100)
            .map(|l| {
                let ang = (0.05 * l as f64).sin();
                C64::new(ang.cos(), ang.sin()) * 2.0 + C64::new(0.3, -0.2)
            })
            .collect();
        let f0 = 60.75e9;
        let fit_a = fit_circle(&y).unwrap();
        let d_a = extract_phase(&y, &fit_a, f0).unwrap();
        let scaled: Vec<C64> = y.iter().map(|p| p * 3.7).collect();
        let fit_b = fit_circle(&scaled).unwrap();
        let d_b = extract_phase(&scaled, &fit_b, f0).unwrap();
        for (a, b) in d_a.iter().zip(d_b.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    // ---- end-to-end extraction ----

    fn subject_scene(noise_snr_db: Option<f64>) -> SceneSpec {
        SceneSpec {
            subject_range_m: 0.6,
            subject_angle_rad: 0.15,
            track: VitalTrack {
                beat_times: regular_beats(60.0, 70.0, 0.0, 4),
                resp_rate: 0.25,
                resp_amplitude: 4e-3,
                heartbeat_amplitude: 0.2e-3,
                heartbeat_pulse_width: 0.05,
                motion_segments: vec![],
            },
            clutter: vec![],
            noise_snr_db,
            seed: 99,
            duration_s: 70.0,
            interferer: None,
        }
    }

    #[test]
    fn extraction_correlates_with_ground_truth() {
        let config = RadarConfig::default();
        let scene = subject_scene(None);
        let series = synth_decimated(&scene, &config).unwrap();
        let window = series.slice_time(series.len - 900, series.len);
        let filtered = crate::frontend::clutter_filter(&window).unwrap();
        let bin = (0.6 / series.range_bin_size).round() as usize;
        let motions = extract_micromotions(&filtered, bin, config.center_frequency()).unwrap();
        assert_eq!(motions.waveforms.len(), MICROMOTION_BINS);
        assert_eq!(motions.waveforms[0].len(), 900);

        let gt = crate::scene::gen_ground_truth(&scene, &config, (60.0, 15.0)).unwrap();
        let t0 = series.len - 900;
        let mut truth: Vec<f64> = gt.displacement[t0..t0 + 900].to_vec();
        detrend_linear(&mut truth);

        let idx = motions.bin_indices.iter().position(|&b| b == bin).unwrap();
        let extracted = &motions.waveforms[idx];
        let corr = pearson(extracted, &truth).unwrap();
        assert!(corr > 0.99, "correlation {corr}");

        let amp_ratio = crate::num::variance(extracted).sqrt() / crate::num::variance(&truth).sqrt();
        assert!((amp_ratio - 1.0).abs() < 0.05, "amplitude ratio {amp_ratio}");
    }

    #[test]
    fn extraction_empty_scene_near_zero() {
        let config = RadarConfig::default();
        let mut scene = subject_scene(None);
        scene.track.resp_amplitude = 0.0;
        scene.track.heartbeat_amplitude = 0.0;
        scene.track.beat_times.clear();
        scene.duration_s = 62.0;
        let series = synth_decimated(&scene, &config).unwrap();
        let window = series.slice_time(0, 900);
        let filtered = crate::frontend::clutter_filter(&window).unwrap();
        let motions = extract_micromotions(&filtered, 22, config.center_frequency()).unwrap();
        for w in &motions.waveforms {
            let rms = crate::num::variance(w).sqrt();
            assert!(rms < 1e-6, "rms {rms}");
        }
    }

    #[test]
    fn extraction_window_sample_count() {
        let config = RadarConfig::default();
        let scene = subject_scene(Some(20.0));
        let series = synth_decimated(&scene, &config).unwrap();
        let window = series.slice_time(0, 900);
        let filtered = crate::frontend::clutter_filter(&window).unwrap();
        let motions = extract_micromotions(&filtered, 22, config.center_frequency()).unwrap();
        for w in &motions.waveforms {
            assert_eq!(w.len(), 900);
        }
    }

    #[test]
    fn extraction_clamps_at_edges() {
        let series = {
            let mut s = RangeProfileSeries::zeroed(32, 3, 20, 15.0, 0.027, 0.0);
            let mut rng = Rng::new(2);
            for t in 0..32 {
                for m in 0..3 {
                    for k in 0..20 {
                        s.set(t, m, k, C64::new(rng.normal(), rng.normal()));
                    }
                }
            }
            s
        };
        let motions = extract_micromotions(&series, 2, 60.75e9).unwrap();
        assert!(motions.clamped);
        assert_eq!(motions.bin_indices[0], 0);
        assert_eq!(*motions.bin_indices.last().unwrap(), 15);
    }

    #[test]
    fn extraction_amplitude_scale_small_displacement() {
        // Pure sinusoidal displacement with amplitude <= lambda/8 recovered
        // within 5% at 20 dB SNR.
        let config = RadarConfig::default();
        let lambda = wavelength(&config);
        let amp = lambda / 8.0 * 0.9;
        let mut scene = subject_scene(Some(20.0));
        scene.track.resp_amplitude = amp;
        scene.track.resp_rate = 0.3;
        scene.track.heartbeat_amplitude = 0.0;
        scene.track.beat_times.clear();
        scene.duration_s = 62.0;
        let series = synth_decimated(&scene, &config).unwrap();
        let window = series.slice_time(0, 900);
        let filtered = crate::frontend::clutter_filter(&window).unwrap();
        let bin = (0.6 / series.range_bin_size).round() as usize;
        let motions = extract_micromotions(&filtered, bin, config.center_frequency()).unwrap();
        let idx = motions.bin_indices.iter().position(|&b| b == bin).unwrap();
        let extracted = &motions.waveforms[idx];
        // RMS of a sine of amplitude A is A/sqrt(2).
        let got_amp = crate::num::variance(extracted).sqrt() * std::f64::consts::SQRT_2;
        assert!(
            (got_amp - amp).abs() / amp < 0.05,
            "amplitude {got_amp} vs {amp}"
        );
    }
}
