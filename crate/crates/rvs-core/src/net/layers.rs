//! 1D network layers: convolution, depthwise/pointwise (separable)
//! convolution, batch normalization and ReLU, each with a reverse-mode
//! backward pass. Layers operate on [`Batch`] tensors laid out
//! `[example][channel][position]` and use same-length zero padding.

use crate::num::Real;

/// Dense rank-3 tensor `[n][ch][len]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub data: Vec<T>,
    pub n: usize,
    pub ch: usize,
    pub len: usize,
}

impl<T: Real> Batch<T> {
    pub fn zeros(n: usize, ch: usize, len: usize) -> Self {
        Batch {
            data: vec![T::zero(); n * ch * len],
            n,
            ch,
            len,
        }
    }

    pub fn from_vec(data: Vec<T>, n: usize, ch: usize, len: usize) -> Self {
        assert_eq!(data.len(), n * ch * len);
        Batch { data, n, ch, len }
    }

    #[inline]
    pub fn row(&self, i: usize, c: usize) -> &[T] {
        let start = (i * self.ch + c) * self.len;
        &self.data[start..start + self.len]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize, c: usize) -> &mut [T] {
        let start = (i * self.ch + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    /// Reinterprets `[n][ch][len]` as `[n*ch][1][len]` without copying.
    pub fn merge_channels_into_batch(self) -> Batch<T> {
        Batch {
            n: self.n * self.ch,
            ch: 1,
            len: self.len,
            data: self.data,
        }
    }

    /// Reinterprets `[n*k][ch][len]` as `[n][k*ch][len]`-style regrouping is
    /// not needed; this splits the batch axis back after a merge.
    pub fn split_batch(self, groups: usize) -> Batch<T> {
        assert_eq!(self.n % groups, 0);
        Batch {
            n: self.n / groups,
            ch: self.ch * groups,
            len: self.len,
            data: self.data,
        }
    }
}

/// Adds `rhs` into `lhs` element-wise.
pub fn add_into<T: Real>(lhs: &mut Batch<T>, rhs: &Batch<T>) {
    debug_assert_eq!(lhs.data.len(), rhs.data.len());
    for (a, b) in lhs.data.iter_mut().zip(rhs.data.iter()) {
        *a += *b;
    }
}

// ---- Conv1D ----

/// Same-padded 1D convolution. Weights `[out_ch][in_ch][kernel]` flat,
/// bias `[out_ch]`. Odd kernels only.
pub fn conv1d_forward<T: Real>(
    x: &Batch<T>,
    w: &[T],
    b: &[T],
    out_ch: usize,
    kernel: usize,
) -> Batch<T> {
    debug_assert_eq!(w.len(), out_ch * x.ch * kernel);
    debug_assert_eq!(b.len(), out_ch);
    debug_assert_eq!(kernel % 2, 1, "odd kernels only");
    let len = x.len;
    let mut out = Batch::zeros(x.n, out_ch, len);
    let in_stride = x.ch * len;
    let out_stride = out_ch * len;
    parallel_examples(
        x.n,
        &x.data,
        in_stride,
        &mut out.data,
        out_stride,
        |n, xs, os| conv1d_run(n, xs, os, x.ch, out_ch, kernel, len, w, b),
    );
    out
}

/// Examples are independent in every convolution; split the batch across a
/// few threads with disjoint output slices. Results are identical to the
/// sequential path because no reduction crosses a thread boundary.
fn parallel_examples<T: Real, F>(
    n: usize,
    input: &[T],
    in_stride: usize,
    output: &mut [T],
    out_stride: usize,
    work: F,
) where
    F: Fn(usize, &[T], &mut [T]) + Sync,
{
    let threads = max_threads().min(n.max(1));
    if threads <= 1 || n < 2 {
        work(n, input, output);
        return;
    }
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        let mut out_rest = output;
        let mut in_rest = input;
        let mut remaining = n;
        let work = &work;
        while remaining > 0 {
            let take = chunk.min(remaining);
            let (out_here, out_tail) = out_rest.split_at_mut(take * out_stride);
            let (in_here, in_tail) = in_rest.split_at(take * in_stride);
            out_rest = out_tail;
            in_rest = in_tail;
            remaining -= take;
            scope.spawn(move || work(take, in_here, out_here));
        }
    });
}

/// Four-lane dot product: a fixed summation order that breaks the serial
/// FMA dependency chain so the loop can pipeline.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let (av, bv) = (&a[4 * i..4 * i + 4], &b[4 * i..4 * i + 4]);
        acc[0] += av[0] * bv[0];
        acc[1] += av[1] * bv[1];
        acc[2] += av[2] * bv[2];
        acc[3] += av[3] * bv[3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

fn max_threads() -> usize {
    static N: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *N.get_or_init(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(4)
    })
}

#[allow(clippy::too_many_arguments)]
fn conv1d_run<T: Real>(
    n: usize,
    xs: &[T],
    os: &mut [T],
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    len: usize,
    w: &[T],
    b: &[T],
) {
    let pad = kernel / 2;
    for i in 0..n {
        for oc in 0..out_ch {
            let o_start = (i * out_ch + oc) * len;
            for ic in 0..in_ch {
                let x_row = &xs[(i * in_ch + ic) * len..(i * in_ch + ic + 1) * len];
                for kk in 0..kernel {
                    let wv = w[(oc * in_ch + ic) * kernel + kk];
                    let shift = kk as isize - pad as isize;
                    let o_row = &mut os[o_start..o_start + len];
                    if shift >= 0 {
                        let s = shift as usize;
                        let m = len - s;
                        for (d, &xv) in o_row[..m].iter_mut().zip(&x_row[s..]) {
                            *d += wv * xv;
                        }
                    } else {
                        let s = (-shift) as usize;
                        for (d, &xv) in o_row[s..].iter_mut().zip(&x_row[..len - s]) {
                            *d += wv * xv;
                        }
                    }
                }
            }
            let bias = b[oc];
            for v in &mut os[o_start..o_start + len] {
                *v += bias;
            }
        }
    }
}

/// Backward pass of [`conv1d_forward`]: accumulates weight/bias gradients
/// into `gw`/`gb` and returns the input gradient.
pub fn conv1d_backward<T: Real>(
    x: &Batch<T>,
    w: &[T],
    out_ch: usize,
    kernel: usize,
    gout: &Batch<T>,
    gw: &mut [T],
    gb: &mut [T],
) -> Batch<T> {
    let len = x.len;
    let in_ch = x.ch;
    let mut gin = Batch::zeros(x.n, in_ch, len);
    let threads = max_threads().min(x.n.max(1));
    if threads <= 1 || x.n < 2 {
        conv1d_backward_run(
            x.n, &x.data, &gout.data, &mut gin.data, in_ch, out_ch, kernel, len, w, gw, gb,
        );
        return gin;
    }
    // Per-thread weight/bias accumulators, merged in chunk order so the
    // result does not depend on scheduling.
    let chunk = x.n.div_ceil(threads);
    let locals: Vec<(Vec<T>, Vec<T>)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut gin_rest: &mut [T] = &mut gin.data;
        let mut x_rest: &[T] = &x.data;
        let mut g_rest: &[T] = &gout.data;
        let mut remaining = x.n;
        while remaining > 0 {
            let take = chunk.min(remaining);
            let (gin_here, gin_tail) = gin_rest.split_at_mut(take * in_ch * len);
            let (x_here, x_tail) = x_rest.split_at(take * in_ch * len);
            let (g_here, g_tail) = g_rest.split_at(take * out_ch * len);
            gin_rest = gin_tail;
            x_rest = x_tail;
            g_rest = g_tail;
            remaining -= take;
            handles.push(scope.spawn(move || {
                let mut gw_local = vec![T::zero(); w.len()];
                let mut gb_local = vec![T::zero(); out_ch];
                conv1d_backward_run(
                    take, x_here, g_here, gin_here, in_ch, out_ch, kernel, len, w,
                    &mut gw_local, &mut gb_local,
                );
                (gw_local, gb_local)
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (gw_local, gb_local) in locals {
        for (a, b) in gw.iter_mut().zip(&gw_local) {
            *a += *b;
        }
        for (a, b) in gb.iter_mut().zip(&gb_local) {
            *a += *b;
        }
    }
    gin
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward_run<T: Real>(
    n: usize,
    xs: &[T],
    gs: &[T],
    gins: &mut [T],
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    len: usize,
    w: &[T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let pad = kernel / 2;
    for i in 0..n {
        for oc in 0..out_ch {
            let g_row = &gs[(i * out_ch + oc) * len..(i * out_ch + oc + 1) * len];
            let mut gsum = T::zero();
            for &g in g_row {
                gsum += g;
            }
            gb[oc] += gsum;
            for ic in 0..in_ch {
                let x_row = &xs[(i * in_ch + ic) * len..(i * in_ch + ic + 1) * len];
                let gi_start = (i * in_ch + ic) * len;
                for kk in 0..kernel {
                    let widx = (oc * in_ch + ic) * kernel + kk;
                    let wv = w[widx];
                    let shift = kk as isize - pad as isize;
                    let gi_row = &mut gins[gi_start..gi_start + len];
                    let acc = if shift >= 0 {
                        let s = shift as usize;
                        let m = len - s;
                        for (gi, &g) in gi_row[s..].iter_mut().zip(&g_row[..m]) {
                            *gi += wv * g;
                        }
                        dot(&g_row[..m], &x_row[s..s + m])
                    } else {
                        let s = (-shift) as usize;
                        let m = len - s;
                        for (gi, &g) in gi_row[..m].iter_mut().zip(&g_row[s..]) {
                            *gi += wv * g;
                        }
                        dot(&g_row[s..s + m], &x_row[..m])
                    };
                    gw[widx] += acc;
                }
            }
        }
    }
}

// ---- Depthwise Conv1D (first stage of separable convolution) ----

/// Same-padded depthwise convolution: one `kernel`-tap filter per channel,
/// weights `[ch][kernel]` flat, no bias (the pointwise stage carries it).
pub fn depthwise_forward<T: Real>(x: &Batch<T>, w: &[T], kernel: usize) -> Batch<T> {
    debug_assert_eq!(w.len(), x.ch * kernel);
    let len = x.len;
    let ch = x.ch;
    let mut out = Batch::zeros(x.n, ch, len);
    let stride = ch * len;
    parallel_examples(x.n, &x.data, stride, &mut out.data, stride, |n, xs, os| {
        depthwise_run(n, xs, os, ch, kernel, len, w)
    });
    out
}

fn depthwise_run<T: Real>(
    n: usize,
    xs: &[T],
    os: &mut [T],
    ch: usize,
    kernel: usize,
    len: usize,
    w: &[T],
) {
    let pad = kernel / 2;
    for i in 0..n {
        for c in 0..ch {
            let x_row = &xs[(i * ch + c) * len..(i * ch + c + 1) * len];
            let o_start = (i * ch + c) * len;
            for kk in 0..kernel {
                let wv = w[c * kernel + kk];
                let shift = kk as isize - pad as isize;
                let o_row = &mut os[o_start..o_start + len];
                if shift >= 0 {
                    let s = shift as usize;
                    let m = len - s;
                    for (d, &xv) in o_row[..m].iter_mut().zip(&x_row[s..]) {
                        *d += wv * xv;
                    }
                } else {
                    let s = (-shift) as usize;
                    for (d, &xv) in o_row[s..].iter_mut().zip(&x_row[..len - s]) {
                        *d += wv * xv;
                    }
                }
            }
        }
    }
}

pub fn depthwise_backward<T: Real>(
    x: &Batch<T>,
    w: &[T],
    kernel: usize,
    gout: &Batch<T>,
    gw: &mut [T],
) -> Batch<T> {
    let len = x.len;
    let ch = x.ch;
    let mut gin = Batch::zeros(x.n, ch, len);
    let threads = max_threads().min(x.n.max(1));
    if threads <= 1 || x.n < 2 {
        depthwise_backward_run(x.n, &x.data, &gout.data, &mut gin.data, ch, kernel, len, w, gw);
        return gin;
    }
    let chunk = x.n.div_ceil(threads);
    let stride = ch * len;
    let locals: Vec<Vec<T>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut gin_rest: &mut [T] = &mut gin.data;
        let mut x_rest: &[T] = &x.data;
        let mut g_rest: &[T] = &gout.data;
        let mut remaining = x.n;
        while remaining > 0 {
            let take = chunk.min(remaining);
            let (gin_here, gin_tail) = gin_rest.split_at_mut(take * stride);
            let (x_here, x_tail) = x_rest.split_at(take * stride);
            let (g_here, g_tail) = g_rest.split_at(take * stride);
            gin_rest = gin_tail;
            x_rest = x_tail;
            g_rest = g_tail;
            remaining -= take;
            handles.push(scope.spawn(move || {
                let mut gw_local = vec![T::zero(); w.len()];
                depthwise_backward_run(
                    take, x_here, g_here, gin_here, ch, kernel, len, w, &mut gw_local,
                );
                gw_local
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for gw_local in locals {
        for (a, b) in gw.iter_mut().zip(&gw_local) {
            *a += *b;
        }
    }
    gin
}

#[allow(clippy::too_many_arguments)]
fn depthwise_backward_run<T: Real>(
    n: usize,
    xs: &[T],
    gs: &[T],
    gins: &mut [T],
    ch: usize,
    kernel: usize,
    len: usize,
    w: &[T],
    gw: &mut [T],
) {
    let pad = kernel / 2;
    for i in 0..n {
        for c in 0..ch {
            let x_row = &xs[(i * ch + c) * len..(i * ch + c + 1) * len];
            let g_row = &gs[(i * ch + c) * len..(i * ch + c + 1) * len];
            let gi_start = (i * ch + c) * len;
            for kk in 0..kernel {
                let widx = c * kernel + kk;
                let wv = w[widx];
                let shift = kk as isize - pad as isize;
                let gi_row = &mut gins[gi_start..gi_start + len];
                let acc = if shift >= 0 {
                    let s = shift as usize;
                    let m = len - s;
                    for (gi, &g) in gi_row[s..].iter_mut().zip(&g_row[..m]) {
                        *gi += wv * g;
                    }
                    dot(&g_row[..m], &x_row[s..s + m])
                } else {
                    let s = (-shift) as usize;
                    let m = len - s;
                    for (gi, &g) in gi_row[..m].iter_mut().zip(&g_row[s..]) {
                        *gi += wv * g;
                    }
                    dot(&g_row[s..s + m], &x_row[..m])
                };
                gw[widx] += acc;
            }
        }
    }
}

// ---- Batch normalization ----

pub const BN_EPS: f64 = 1e-5;
/// Moving-statistics update factor: small corpora need the moving stats to
/// settle within a few dozen steps.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Batch<T>,
    pub inv_std: Vec<T>,
}

/// Training-mode batch norm: normalizes with batch statistics over
/// (example, position) per channel and updates the moving statistics.
pub fn batchnorm_forward_train<T: Real>(
    x: &Batch<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
) -> (Batch<T>, BnCache<T>) {
    let m = T::from_usize(x.n * x.len).unwrap();
    let eps = T::from_f64_lossy(BN_EPS);
    let momentum = T::from_f64_lossy(BN_MOMENTUM);
    let mut out = Batch::zeros(x.n, x.ch, x.len);
    let mut xhat = Batch::zeros(x.n, x.ch, x.len);
    let mut inv_std = vec![T::zero(); x.ch];
    let len = x.len;
    for c in 0..x.ch {
        let mut mean = T::zero();
        for i in 0..x.n {
            let row = &x.data[(i * x.ch + c) * len..(i * x.ch + c + 1) * len];
            for &v in row {
                mean += v;
            }
        }
        mean /= m;
        let mut var = T::zero();
        for i in 0..x.n {
            let row = &x.data[(i * x.ch + c) * len..(i * x.ch + c + 1) * len];
            for &v in row {
                let d = v - mean;
                var += d * d;
            }
        }
        var /= m;
        let istd = T::one() / (var + eps).sqrt();
        inv_std[c] = istd;
        running_mean[c] = running_mean[c] * momentum + mean * (T::one() - momentum);
        running_var[c] = running_var[c] * momentum + var * (T::one() - momentum);
        let (g, be) = (gamma[c], beta[c]);
        for i in 0..x.n {
            let start = (i * x.ch + c) * len;
            let src = &x.data[start..start + len];
            let xh = &mut xhat.data[start..start + len];
            let o = &mut out.data[start..start + len];
            for ((slot, ov), &v) in xh.iter_mut().zip(o.iter_mut()).zip(src) {
                let h = (v - mean) * istd;
                *slot = h;
                *ov = g * h + be;
            }
        }
    }
    (out, BnCache { xhat, inv_std })
}

/// Inference-mode batch norm: a pure affine map using moving statistics.
pub fn batchnorm_forward_infer<T: Real>(
    x: &Batch<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> Batch<T> {
    let eps = T::from_f64_lossy(BN_EPS);
    let len = x.len;
    let mut out = Batch::zeros(x.n, x.ch, len);
    for c in 0..x.ch {
        let istd = T::one() / (running_var[c] + eps).sqrt();
        let scale = gamma[c] * istd;
        let shift = beta[c] - running_mean[c] * scale;
        for i in 0..x.n {
            let start = (i * x.ch + c) * len;
            let src = &x.data[start..start + len];
            let o = &mut out.data[start..start + len];
            for (slot, &v) in o.iter_mut().zip(src) {
                *slot = scale * v + shift;
            }
        }
    }
    out
}

/// Backward pass of training-mode batch norm.
pub fn batchnorm_backward<T: Real>(
    cache: &BnCache<T>,
    gamma: &[T],
    gout: &Batch<T>,
    ggamma: &mut [T],
    gbeta: &mut [T],
) -> Batch<T> {
    let x = &cache.xhat;
    let m = T::from_usize(x.n * x.len).unwrap();
    let len = x.len;
    let mut gin = Batch::zeros(x.n, x.ch, len);
    for c in 0..x.ch {
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for i in 0..x.n {
            let start = (i * x.ch + c) * len;
            let gr = &gout.data[start..start + len];
            let xr = &x.data[start..start + len];
            sum_g += gr.iter().fold(T::zero(), |a, &g| a + g);
            sum_gx += dot(gr, xr);
        }
        ggamma[c] += sum_gx;
        gbeta[c] += sum_g;
        let k = gamma[c] * cache.inv_std[c] / m;
        for i in 0..x.n {
            let start = (i * x.ch + c) * len;
            let gr = &gout.data[start..start + len];
            let xr = &x.data[start..start + len];
            let gi = &mut gin.data[start..start + len];
            for ((slot, &g), &xh) in gi.iter_mut().zip(gr).zip(xr) {
                *slot = k * (m * g - sum_g - xh * sum_gx);
            }
        }
    }
    gin
}

// ---- ReLU ----

pub fn relu_forward<T: Real>(x: &Batch<T>) -> Batch<T> {
    let mut out = x.clone();
    for v in out.data.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

/// Backward through ReLU given the forward *output* (zero where inactive).
pub fn relu_backward<T: Real>(out: &Batch<T>, gout: &Batch<T>) -> Batch<T> {
    let mut gin = gout.clone();
    for (g, &o) in gin.data.iter_mut().zip(out.data.iter()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
    gin
}

/// Activity mask of a ReLU output, one bit of information per element.
pub fn relu_mask<T: Real>(out: &Batch<T>) -> Vec<bool> {
    out.data.iter().map(|&v| v > T::zero()).collect()
}

/// Backward through ReLU from a stored activity mask.
pub fn relu_backward_mask<T: Real>(mask: &[bool], gout: &Batch<T>) -> Batch<T> {
    let mut gin = gout.clone();
    for (g, &m) in gin.data.iter_mut().zip(mask.iter()) {
        if !m {
            *g = T::zero();
        }
    }
    gin
}
