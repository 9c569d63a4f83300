//! Radix-2 decimation-in-time FFT, generic over the scalar type.
//!
//! Callers zero-pad to a power of two ([`fft_padded`]); all windows in this
//! pipeline are short (≤ 2048 bins) so no further optimization is needed.

use num_complex::Complex;

use crate::num::Real;

/// In-place forward FFT. `data.len()` must be a power of two.
pub fn fft_in_place<T: Real>(data: &mut [Complex<T>]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j >= m {
            j -= m;
            m >>= 1;
        }
        j += m;
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let ang = -T::TAU() / T::from_usize(len).unwrap();
        let wn = Complex::new(ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let mut w = Complex::new(T::one(), T::zero());
            for k in 0..half {
                let e = data[start + k];
                let o = data[start + k + half] * w;
                data[start + k] = e + o;
                data[start + k + half] = e - o;
                w = w * wn;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Forward FFT of an arbitrary-length signal, zero-padded to `min_len`
/// rounded up to the next power of two.
pub fn fft_padded<T: Real>(signal: &[Complex<T>], min_len: usize) -> Vec<Complex<T>> {
    let n = signal.len().max(min_len).max(1).next_power_of_two();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    buf[..signal.len()].copy_from_slice(signal);
    fft_in_place(&mut buf);
    buf
}

/// Forward FFT of a real signal, zero-padded as in [`fft_padded`].
pub fn fft_real_padded<T: Real>(signal: &[T], min_len: usize) -> Vec<Complex<T>> {
    let n = signal.len().max(min_len).max(1).next_power_of_two();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (slot, &x) in buf.iter_mut().zip(signal.iter()) {
        slot.re = x;
    }
    fft_in_place(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent O(N^2) DFT used only to validate the fast transform.
    fn dft_reference(input: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = input.len();
        let mut out = vec![Complex::new(0.0, 0.0); n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, &x) in input.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc += x * Complex::new(ang.cos(), ang.sin());
            }
            *slot = acc;
        }
        out
    }

    #[test]
    fn matches_direct_dft() {
        let mut state = 0x1234u64;
        for &n in &[1usize, 2, 4, 8, 64, 256, 1024] {
            let input: Vec<Complex<f64>> = (0..n)
                .map(|_| {
                    let a = crate::rng::splitmix64(&mut state) as i64 as f64 / 1e18;
                    let b = crate::rng::splitmix64(&mut state) as i64 as f64 / 1e18;
                    Complex::new(a, b)
                })
                .collect();
            let expected = dft_reference(&input);
            let mut got = input.clone();
            fft_in_place(&mut got);
            for (g, e) in got.iter().zip(expected.iter()) {
                assert!((g - e).norm() < 1e-9 * (1.0 + e.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn tone_lands_on_its_bin() {
        let n = 256;
        let k0 = 22;
        let signal: Vec<Complex<f64>> = (0..n)
            .map(|i| {
                let ang = 2.0 * std::f64::consts::PI * (k0 * i) as f64 / n as f64;
                Complex::new(ang.cos(), ang.sin())
            })
            .collect();
        let spec = fft_padded(&signal, n);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, k0);
        assert!((spec[k0].norm() - n as f64).abs() < 1e-9);
    }

    #[test]
    fn real_input_padding() {
        let signal = vec![1.0f64; 10];
        let spec = fft_real_padded(&signal, 16);
        assert_eq!(spec.len(), 16);
        assert!((spec[0].re - 10.0).abs() < 1e-12);
    }

    #[test]
    fn f32_instantiation_agrees_with_f64() {
        let signal64: Vec<Complex<f64>> = (0..128)
            .map(|i| Complex::new((i as f64 * 0.17).sin(), (i as f64 * 0.31).cos()))
            .collect();
        let signal32: Vec<Complex<f32>> = signal64
            .iter()
            .map(|c| Complex::new(c.re as f32, c.im as f32))
            .collect();
        let s64 = fft_padded(&signal64, 128);
        let s32 = fft_padded(&signal32, 128);
        for (a, b) in s64.iter().zip(s32.iter()) {
            assert!((a.re - b.re as f64).abs() < 1e-3);
            assert!((a.im - b.im as f64).abs() < 1e-3);
        }
    }
}
