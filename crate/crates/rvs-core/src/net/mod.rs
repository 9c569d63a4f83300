//! The lightweight two-block pulse network.
//!
//! Block one turns 16 micro-motion waveforms into a pulse waveform: each
//! waveform passes through three ResNet layers with weights shared across
//! all 16 branches, the branch outputs are summed, and a ResNet plus a plain
//! convolution produce the single-channel pulse. Block two refines the pulse
//! with a ResNet, expands it through the multi-resolution FFT bank, and maps
//! the concatenated rows through two ResNet layers and a projection to a
//! 189-bin softmax pseudo-spectrum over 35-200 bpm.
//!
//! A ResNet layer here is: Conv1D -> BatchNorm -> ReLU -> SeparableConv1D
//! (depthwise then pointwise, which keeps the parameter count small) ->
//! BatchNorm -> shortcut add (1-kernel projection when the channel count
//! changes) -> ReLU.

pub mod fftbank;
pub mod layers;

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::micromotion::{MicroMotionSet, MICROMOTION_BINS};
use crate::num::Real;

use fftbank::{FftBankCache, FftBankError, FftBankTables, BANK_ROWS};
use layers::*;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Bank(#[from] FftBankError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model magic")]
    BadMagic,
    #[error("malformed model header: {0}")]
    Header(String),
    #[error("weight blob size mismatch")]
    BlobSize,
}

/// Plain convolution spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

/// ResNet layer spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

/// Full architecture description; serialized into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Waveform samples per branch (900 sleep, 240 meditation).
    pub input_len: usize,
    /// Number of shared-weight input branches.
    pub branches: usize,
    pub branch_layers: Vec<ResNetSpec>,
    pub post_sum: ResNetSpec,
    pub out_conv: ConvSpec,
    pub pre_fft: ResNetSpec,
    pub spectrum_layers: Vec<ResNetSpec>,
    pub proj: ConvSpec,
}

impl ModelSpec {
    /// Default architecture for a given input length, sized to land the
    /// total parameter count in the 8k-12k band.
    pub fn default_for_len(input_len: usize) -> Self {
        ModelSpec {
            input_len,
            branches: MICROMOTION_BINS,
            branch_layers: vec![
                ResNetSpec { in_ch: 1, out_ch: 8, kernel: 7 },
                ResNetSpec { in_ch: 8, out_ch: 16, kernel: 5 },
                ResNetSpec { in_ch: 16, out_ch: 16, kernel: 3 },
            ],
            post_sum: ResNetSpec { in_ch: 16, out_ch: 16, kernel: 5 },
            out_conv: ConvSpec { in_ch: 16, out_ch: 1, kernel: 3 },
            pre_fft: ResNetSpec { in_ch: 1, out_ch: 1, kernel: 5 },
            spectrum_layers: vec![
                ResNetSpec { in_ch: BANK_ROWS, out_ch: 32, kernel: 5 },
                ResNetSpec { in_ch: 32, out_ch: 16, kernel: 3 },
            ],
            proj: ConvSpec { in_ch: 16, out_ch: 1, kernel: 1 },
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let mut ch = 1;
        for l in &self.branch_layers {
            if l.in_ch != ch {
                return Err(NetError::Shape("branch channel chain broken".into()));
            }
            ch = l.out_ch;
        }
        if self.post_sum.in_ch != ch || self.out_conv.in_ch != self.post_sum.out_ch {
            return Err(NetError::Shape("waveform head channel chain broken".into()));
        }
        if self.out_conv.out_ch != 1 || self.pre_fft.in_ch != 1 || self.pre_fft.out_ch != 1 {
            return Err(NetError::Shape("pulse path must be single channel".into()));
        }
        let mut ch = BANK_ROWS;
        for l in &self.spectrum_layers {
            if l.in_ch != ch {
                return Err(NetError::Shape("spectrum channel chain broken".into()));
            }
            ch = l.out_ch;
        }
        if self.proj.in_ch != ch || self.proj.out_ch != 1 || self.proj.kernel != 1 {
            return Err(NetError::Shape("projection must be 1-kernel to 1 channel".into()));
        }
        Ok(())
    }
}

// ---- Parameter layout ----

#[derive(Debug, Clone)]
pub struct ConvParams {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub spec: ConvSpec,
}

#[derive(Debug, Clone)]
pub struct BnParams {
    pub gamma: Range<usize>,
    pub beta: Range<usize>,
    /// Moving mean/variance live in the non-trainable state store.
    pub mean: Range<usize>,
    pub var: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct ResNetParams {
    pub spec: ResNetSpec,
    pub conv1: ConvParams,
    pub bn1: BnParams,
    pub dw: Range<usize>,
    pub pw: ConvParams,
    pub bn2: BnParams,
    pub shortcut: Option<ConvParams>,
}

#[derive(Debug, Clone)]
pub struct ModelLayout {
    pub branch: Vec<ResNetParams>,
    pub post_sum: ResNetParams,
    pub out_conv: ConvParams,
    pub pre_fft: ResNetParams,
    pub spectrum: Vec<ResNetParams>,
    pub proj: ConvParams,
    pub n_params: usize,
    pub n_state: usize,
}

struct Alloc {
    params: usize,
    state: usize,
}

impl Alloc {
    fn params(&mut self, n: usize) -> Range<usize> {
        let r = self.params..self.params + n;
        self.params += n;
        r
    }
    fn state(&mut self, n: usize) -> Range<usize> {
        let r = self.state..self.state + n;
        self.state += n;
        r
    }
    fn conv(&mut self, spec: ConvSpec) -> ConvParams {
        ConvParams {
            w: self.params(spec.out_ch * spec.in_ch * spec.kernel),
            b: self.params(spec.out_ch),
            spec,
        }
    }
    fn bn(&mut self, ch: usize) -> BnParams {
        BnParams {
            gamma: self.params(ch),
            beta: self.params(ch),
            mean: self.state(ch),
            var: self.state(ch),
        }
    }
    fn resnet(&mut self, spec: ResNetSpec) -> ResNetParams {
        let conv1 = self.conv(ConvSpec {
            in_ch: spec.in_ch,
            out_ch: spec.out_ch,
            kernel: spec.kernel,
        });
        let bn1 = self.bn(spec.out_ch);
        let dw = self.params(spec.out_ch * spec.kernel);
        let pw = self.conv(ConvSpec {
            in_ch: spec.out_ch,
            out_ch: spec.out_ch,
            kernel: 1,
        });
        let bn2 = self.bn(spec.out_ch);
        let shortcut = if spec.in_ch != spec.out_ch {
            Some(self.conv(ConvSpec {
                in_ch: spec.in_ch,
                out_ch: spec.out_ch,
                kernel: 1,
            }))
        } else {
            None
        };
        ResNetParams {
            spec,
            conv1,
            bn1,
            dw,
            pw,
            bn2,
            shortcut,
        }
    }
}

impl ModelLayout {
    pub fn build(spec: &ModelSpec) -> Self {
        let mut a = Alloc { params: 0, state: 0 };
        let branch = spec.branch_layers.iter().map(|&l| a.resnet(l)).collect();
        let post_sum = a.resnet(spec.post_sum);
        let out_conv = a.conv(spec.out_conv);
        let pre_fft = a.resnet(spec.pre_fft);
        let spectrum = spec.spectrum_layers.iter().map(|&l| a.resnet(l)).collect();
        let proj = a.conv(spec.proj);
        ModelLayout {
            branch,
            post_sum,
            out_conv,
            pre_fft,
            spectrum,
            proj,
            n_params: a.params,
            n_state: a.state,
        }
    }
}

// ---- The network ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

pub struct PulseNet<T: Real> {
    pub spec: ModelSpec,
    pub layout: ModelLayout,
    /// Trainable parameters, flat.
    pub params: Vec<T>,
    /// Non-trainable state (batch-norm moving statistics), flat.
    pub state: Vec<T>,
    tables: FftBankTables<T>,
}

impl<T: Real> PulseNet<T> {
    pub fn new(spec: ModelSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let layout = ModelLayout::build(&spec);
        let mut net = PulseNet {
            tables: FftBankTables::new(spec.input_len),
            params: vec![T::zero(); layout.n_params],
            state: vec![T::zero(); layout.n_state],
            spec,
            layout,
        };
        net.reset_state();
        Ok(net)
    }

    /// He-normal initialization of all convolution weights, unit gamma, zero
    /// beta/bias; deterministic in the seed.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = crate::rng::Rng::new(seed);
        for v in self.params.iter_mut() {
            *v = T::zero();
        }
        let blocks = self.all_resnets_owned();
        for block in &blocks {
            self.init_conv(&block.conv1, &mut rng);
            let std = (2.0 / block.spec.kernel as f64).sqrt();
            for i in block.dw.clone() {
                self.params[i] = T::from_f64_lossy(rng.normal() * std);
            }
            self.init_conv(&block.pw, &mut rng);
            if let Some(sc) = &block.shortcut {
                self.init_conv(sc, &mut rng);
            }
            for i in block.bn1.gamma.clone().chain(block.bn2.gamma.clone()) {
                self.params[i] = T::one();
            }
        }
        // Output heads start near zero: the summed branch activations are
        // large at init, and a small head keeps the initial pulse and logits
        // at the scale of their targets.
        let (oc, proj) = (self.layout.out_conv.clone(), self.layout.proj.clone());
        self.init_conv(&oc, &mut rng);
        self.init_conv(&proj, &mut rng);
        for i in oc.w.clone().chain(proj.w.clone()) {
            self.params[i] = self.params[i] * T::from_f64_lossy(0.05);
        }
        self.reset_state();
    }

    fn init_conv(&mut self, c: &ConvParams, rng: &mut crate::rng::Rng) {
        let fan_in = (c.spec.in_ch * c.spec.kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        for i in c.w.clone() {
            self.params[i] = T::from_f64_lossy(rng.normal() * std);
        }
        for i in c.b.clone() {
            self.params[i] = T::zero();
        }
    }

    fn reset_state(&mut self) {
        for block in self.all_resnets_owned() {
            for i in block.bn1.mean.clone().chain(block.bn2.mean.clone()) {
                self.state[i] = T::zero();
            }
            for i in block.bn1.var.clone().chain(block.bn2.var.clone()) {
                self.state[i] = T::one();
            }
        }
    }

    fn all_resnets(&self) -> Vec<&ResNetParams> {
        let mut v: Vec<&ResNetParams> = self.layout.branch.iter().collect();
        v.push(&self.layout.post_sum);
        v.push(&self.layout.pre_fft);
        v.extend(self.layout.spectrum.iter());
        v
    }

    fn all_resnets_owned(&self) -> Vec<ResNetParams> {
        self.all_resnets().into_iter().cloned().collect()
    }

    /// Trainable parameter count.
    pub fn trainable_params(&self) -> usize {
        self.layout.n_params
    }

    /// Total parameter count including batch-norm moving statistics.
    pub fn total_params(&self) -> usize {
        self.layout.n_params + self.layout.n_state
    }

    fn p(&self, r: &Range<usize>) -> &[T] {
        &self.params[r.clone()]
    }

    // ---- ResNet block ----

    fn resnet_forward(
        &mut self,
        which: ResNetSel,
        x: Batch<T>,
        mode: Mode,
    ) -> (Batch<T>, Option<ResNetCache<T>>) {
        let block = self.select(which).clone();
        let spec = block.spec;
        let conv1_out = conv1d_forward(
            &x,
            self.p(&block.conv1.w),
            self.p(&block.conv1.b),
            spec.out_ch,
            spec.kernel,
        );
        let (bn1_out, bn1_cache) = self.bn_forward(&block.bn1, &conv1_out, mode);
        let relu1_out = relu_forward(&bn1_out);
        let dw_out = depthwise_forward(&relu1_out, self.p(&block.dw), spec.kernel);
        let pw_out = conv1d_forward(&dw_out, self.p(&block.pw.w), self.p(&block.pw.b), spec.out_ch, 1);
        let (bn2_out, bn2_cache) = self.bn_forward(&block.bn2, &pw_out, mode);
        let mut pre = bn2_out;
        match &block.shortcut {
            Some(sc) => {
                let s = conv1d_forward(&x, self.p(&sc.w), self.p(&sc.b), spec.out_ch, 1);
                add_into(&mut pre, &s);
            }
            None => add_into(&mut pre, &x),
        }
        let out = relu_forward(&pre);
        let cache = match mode {
            Mode::Train => Some(ResNetCache {
                input: x,
                bn1: bn1_cache.unwrap(),
                relu1_out,
                dw_out,
                bn2: bn2_cache.unwrap(),
                out_mask: relu_mask(&out),
            }),
            Mode::Infer => None,
        };
        (out, cache)
    }

    fn bn_forward(
        &mut self,
        bn: &BnParams,
        x: &Batch<T>,
        mode: Mode,
    ) -> (Batch<T>, Option<BnCache<T>>) {
        match mode {
            Mode::Train => {
                let gamma = self.params[bn.gamma.clone()].to_vec();
                let beta = self.params[bn.beta.clone()].to_vec();
                let (mean_r, var_r) = (bn.mean.clone(), bn.var.clone());
                let mut mean = self.state[mean_r.clone()].to_vec();
                let mut var = self.state[var_r.clone()].to_vec();
                let (out, cache) = batchnorm_forward_train(x, &gamma, &beta, &mut mean, &mut var);
                self.state[mean_r].copy_from_slice(&mean);
                self.state[var_r].copy_from_slice(&var);
                (out, Some(cache))
            }
            Mode::Infer => {
                let out = batchnorm_forward_infer(
                    x,
                    &self.params[bn.gamma.clone()],
                    &self.params[bn.beta.clone()],
                    &self.state[bn.mean.clone()],
                    &self.state[bn.var.clone()],
                );
                (out, None)
            }
        }
    }

    fn resnet_backward(
        &self,
        which: ResNetSel,
        cache: &ResNetCache<T>,
        gout: &Batch<T>,
        gparams: &mut [T],
    ) -> Batch<T> {
        let block = self.select(which);
        let spec = block.spec;
        let g = relu_backward_mask(&cache.out_mask, gout);
        let (mut ggamma2, mut gbeta2) = (vec![T::zero(); spec.out_ch], vec![T::zero(); spec.out_ch]);
        let g_bn2 = batchnorm_backward(
            &cache.bn2,
            self.p(&block.bn2.gamma),
            &g,
            &mut ggamma2,
            &mut gbeta2,
        );
        accumulate(gparams, &block.bn2.gamma, &ggamma2);
        accumulate(gparams, &block.bn2.beta, &gbeta2);

        let mut gpw_w = vec![T::zero(); block.pw.w.len()];
        let mut gpw_b = vec![T::zero(); block.pw.b.len()];
        let g_dw_out = conv1d_backward(
            &cache.dw_out,
            self.p(&block.pw.w),
            spec.out_ch,
            1,
            &g_bn2,
            &mut gpw_w,
            &mut gpw_b,
        );
        accumulate(gparams, &block.pw.w, &gpw_w);
        accumulate(gparams, &block.pw.b, &gpw_b);

        let mut gdw = vec![T::zero(); block.dw.len()];
        let g_relu1 =
            depthwise_backward(&cache.relu1_out, self.p(&block.dw), spec.kernel, &g_dw_out, &mut gdw);
        accumulate(gparams, &block.dw, &gdw);

        let g_bn1_out = relu_backward(&cache.relu1_out, &g_relu1);
        let (mut ggamma1, mut gbeta1) = (vec![T::zero(); spec.out_ch], vec![T::zero(); spec.out_ch]);
        let g_conv1_out = batchnorm_backward(
            &cache.bn1,
            self.p(&block.bn1.gamma),
            &g_bn1_out,
            &mut ggamma1,
            &mut gbeta1,
        );
        accumulate(gparams, &block.bn1.gamma, &ggamma1);
        accumulate(gparams, &block.bn1.beta, &gbeta1);

        let mut gw1 = vec![T::zero(); block.conv1.w.len()];
        let mut gb1 = vec![T::zero(); block.conv1.b.len()];
        let mut gin = conv1d_backward(
            &cache.input,
            self.p(&block.conv1.w),
            spec.out_ch,
            spec.kernel,
            &g_conv1_out,
            &mut gw1,
            &mut gb1,
        );
        accumulate(gparams, &block.conv1.w, &gw1);
        accumulate(gparams, &block.conv1.b, &gb1);

        match &block.shortcut {
            Some(sc) => {
                let mut gsw = vec![T::zero(); sc.w.len()];
                let mut gsb = vec![T::zero(); sc.b.len()];
                let g_short =
                    conv1d_backward(&cache.input, self.p(&sc.w), spec.out_ch, 1, &g, &mut gsw, &mut gsb);
                accumulate(gparams, &sc.w, &gsw);
                accumulate(gparams, &sc.b, &gsb);
                add_into(&mut gin, &g_short);
            }
            None => add_into(&mut gin, &g),
        }
        gin
    }

    fn select(&self, which: ResNetSel) -> &ResNetParams {
        match which {
            ResNetSel::Branch(i) => &self.layout.branch[i],
            ResNetSel::PostSum => &self.layout.post_sum,
            ResNetSel::PreFft => &self.layout.pre_fft,
            ResNetSel::Spectrum(i) => &self.layout.spectrum[i],
        }
    }

    // ---- Full forward ----

    /// Forward pass. `input` is `[n][16][input_len]`, already normalized.
    /// Returns the pulse `[n][1][len]`, the softmax rows `[n][1][189]`, and
    /// the caches needed by [`Self::backward`] in training mode.
    pub fn forward(
        &mut self,
        input: &Batch<T>,
        mode: Mode,
    ) -> Result<(Batch<T>, Batch<T>, Option<NetCaches<T>>), NetError> {
        if input.ch != self.spec.branches || input.len != self.spec.input_len {
            return Err(NetError::Shape(format!(
                "expected [n][{}][{}], got [{}][{}][{}]",
                self.spec.branches, self.spec.input_len, input.n, input.ch, input.len
            )));
        }
        let n = input.n;
        let branches = self.spec.branches;

        // Shared branch stack on the merged batch.
        let merged = input.clone().merge_channels_into_batch();
        let mut caches = NetCaches::default();
        let mut x = merged;
        for i in 0..self.layout.branch.len() {
            let (out, cache) = self.resnet_forward(ResNetSel::Branch(i), x, mode);
            if let Some(c) = cache {
                caches.branch.push(c);
            }
            x = out;
        }

        // Sum over branches.
        let ch = x.ch;
        let len = x.len;
        let mut summed = Batch::zeros(n, ch, len);
        for i in 0..n {
            for b in 0..branches {
                for c in 0..ch {
                    let start = ((i * branches + b) * ch + c) * len;
                    let src = &x.data[start..start + len];
                    let dst = summed.row_mut(i, c);
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }

        let (post, post_cache) = self.resnet_forward(ResNetSel::PostSum, summed, mode);
        caches.post_sum = post_cache;
        let oc = self.layout.out_conv.clone();
        let pulse = conv1d_forward(&post, self.p(&oc.w), self.p(&oc.b), 1, oc.spec.kernel);
        if mode == Mode::Train {
            caches.post_out = Some(post);
        }

        let (pre, pre_cache) = self.resnet_forward(ResNetSel::PreFft, pulse.clone(), mode);
        caches.pre_fft = pre_cache;
        let (bank, bank_cache) =
            fftbank::fft_bank_forward(&pre, fftbank::REQUIRED_RATE_HZ, &self.tables)?;
        if mode == Mode::Train {
            caches.bank = Some(bank_cache);
        }

        let mut s = bank;
        for i in 0..self.layout.spectrum.len() {
            let (out, cache) = self.resnet_forward(ResNetSel::Spectrum(i), s, mode);
            if let Some(c) = cache {
                caches.spectrum.push(c);
            }
            s = out;
        }
        let proj = self.layout.proj.clone();
        let logits = conv1d_forward(&s, self.p(&proj.w), self.p(&proj.b), 1, 1);
        if mode == Mode::Train {
            caches.spec_out = Some(s);
        }

        let probs = softmax_rows(&logits);
        if mode == Mode::Train {
            caches.pulse = Some(pulse.clone());
            Ok((pulse, probs, Some(caches)))
        } else {
            Ok((pulse, probs, None))
        }
    }

    /// Reverse-mode gradients of a scalar loss given its gradients w.r.t.
    /// the pulse output and the softmax logits. Returns the flat gradient
    /// aligned with `params`.
    pub fn backward(
        &self,
        caches: &NetCaches<T>,
        g_pulse_loss: &Batch<T>,
        g_logits: &Batch<T>,
    ) -> Vec<T> {
        let mut gparams = vec![T::zero(); self.layout.n_params];
        let n = g_logits.n;
        let branches = self.spec.branches;

        // Spectrum head.
        let spec_out = caches.spec_out.as_ref().expect("train caches");
        let proj = self.layout.proj.clone();
        let mut gproj_w = vec![T::zero(); proj.w.len()];
        let mut gproj_b = vec![T::zero(); proj.b.len()];
        let mut g = conv1d_backward(spec_out, self.p(&proj.w), 1, 1, g_logits, &mut gproj_w, &mut gproj_b);
        accumulate(&mut gparams, &proj.w, &gproj_w);
        accumulate(&mut gparams, &proj.b, &gproj_b);

        for i in (0..self.layout.spectrum.len()).rev() {
            g = self.resnet_backward(ResNetSel::Spectrum(i), &caches.spectrum[i], &g, &mut gparams);
        }

        let g_pre = fftbank::fft_bank_backward(
            self.spec.input_len,
            n,
            caches.bank.as_ref().expect("train caches"),
            &g,
            &self.tables,
        );
        let mut g_pulse = self.resnet_backward(
            ResNetSel::PreFft,
            caches.pre_fft.as_ref().expect("train caches"),
            &g_pre,
            &mut gparams,
        );

        // The pulse also feeds the waveform loss directly.
        add_into(&mut g_pulse, g_pulse_loss);

        let post_out = caches.post_out.as_ref().expect("train caches");
        let oc = self.layout.out_conv.clone();
        let mut goc_w = vec![T::zero(); oc.w.len()];
        let mut goc_b = vec![T::zero(); oc.b.len()];
        let g_post = conv1d_backward(
            post_out,
            self.p(&oc.w),
            1,
            oc.spec.kernel,
            &g_pulse,
            &mut goc_w,
            &mut goc_b,
        );
        accumulate(&mut gparams, &oc.w, &goc_w);
        accumulate(&mut gparams, &oc.b, &goc_b);

        let g_summed = self.resnet_backward(
            ResNetSel::PostSum,
            caches.post_sum.as_ref().expect("train caches"),
            &g_post,
            &mut gparams,
        );

        // Broadcast the sum gradient back to every branch.
        let ch = g_summed.ch;
        let len = g_summed.len;
        let mut g_branch = Batch::zeros(n * branches, ch, len);
        for i in 0..n {
            for b in 0..branches {
                for c in 0..ch {
                    let src = (i * ch + c) * len;
                    let dst = ((i * branches + b) * ch + c) * len;
                    let (row, _) = g_summed.data[src..].split_at(len);
                    g_branch.data[dst..dst + len].copy_from_slice(row);
                }
            }
        }
        let mut g = g_branch;
        for i in (0..self.layout.branch.len()).rev() {
            g = self.resnet_backward(ResNetSel::Branch(i), &caches.branch[i], &g, &mut gparams);
        }
        gparams
    }

    /// Full inference from a micro-motion set: normalize, forward in
    /// inference mode, peak-pick.
    pub fn infer(&mut self, motions: &MicroMotionSet) -> Result<PseudoSpectrum, NetError> {
        let input = normalize_motions(motions, self.spec.input_len)?;
        let (pulse, probs, _) = self.forward(&input, Mode::Infer)?;
        Ok(PseudoSpectrum {
            probs: probs.row(0, 0).iter().map(|v| v.to_f64_lossy()).collect(),
            pulse: pulse.row(0, 0).iter().map(|v| v.to_f64_lossy()).collect(),
        })
    }
}

fn accumulate<T: Real>(gparams: &mut [T], r: &Range<usize>, vals: &[T]) {
    for (slot, v) in gparams[r.clone()].iter_mut().zip(vals) {
        *slot += *v;
    }
}

#[derive(Clone, Copy)]
enum ResNetSel {
    Branch(usize),
    PostSum,
    PreFft,
    Spectrum(usize),
}

#[derive(Debug, Clone)]
pub struct ResNetCache<T> {
    input: Batch<T>,
    bn1: BnCache<T>,
    relu1_out: Batch<T>,
    dw_out: Batch<T>,
    bn2: BnCache<T>,
    out_mask: Vec<bool>,
}

/// All intermediate activations needed for the backward pass.
pub struct NetCaches<T> {
    branch: Vec<ResNetCache<T>>,
    post_sum: Option<ResNetCache<T>>,
    post_out: Option<Batch<T>>,
    pub pulse: Option<Batch<T>>,
    pre_fft: Option<ResNetCache<T>>,
    bank: Option<FftBankCache<T>>,
    spectrum: Vec<ResNetCache<T>>,
    spec_out: Option<Batch<T>>,
}

impl<T> Default for NetCaches<T> {
    fn default() -> Self {
        NetCaches {
            branch: Vec::new(),
            post_sum: None,
            post_out: None,
            pulse: None,
            pre_fft: None,
            bank: None,
            spectrum: Vec::new(),
            spec_out: None,
        }
    }
}

/// Row-wise stable softmax over the last axis, same shape as the input.
pub fn softmax_rows<T: Real>(logits: &Batch<T>) -> Batch<T> {
    let mut out = logits.clone();
    for i in 0..out.n {
        for c in 0..out.ch {
            let row = out.row_mut(i, c);
            let mut max = row[0];
            for &v in row.iter() {
                if v > max {
                    max = v;
                }
            }
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

/// Standard-deviation normalization of a micro-motion set into a
/// `[1][16][len]` batch. All 16 waveforms share one scale — the largest
/// per-waveform standard deviation — so the relative energy ranking of the
/// bins survives normalization and noise-only bins stay small instead of
/// being inflated to unit variance. A zero set stays zero.
pub fn normalize_motions<T: Real>(
    motions: &MicroMotionSet,
    input_len: usize,
) -> Result<Batch<T>, NetError> {
    if motions.waveforms.len() != MICROMOTION_BINS {
        return Err(NetError::Shape(format!(
            "expected {} waveforms, got {}",
            MICROMOTION_BINS,
            motions.waveforms.len()
        )));
    }
    for w in &motions.waveforms {
        if w.len() != input_len {
            return Err(NetError::Shape(format!(
                "waveform length {} != input length {}",
                w.len(),
                input_len
            )));
        }
    }
    let scale = motions
        .waveforms
        .iter()
        .map(|w| crate::num::variance(w).sqrt())
        .fold(0.0f64, f64::max);
    let mut out = Batch::zeros(1, MICROMOTION_BINS, input_len);
    if scale > 1e-18 {
        for (c, w) in motions.waveforms.iter().enumerate() {
            let row = out.row_mut(0, c);
            for (slot, &v) in row.iter_mut().zip(w.iter()) {
                *slot = T::from_f64_lossy(v / scale);
            }
        }
    }
    Ok(out)
}

// ---- Pseudo-spectrum and HR picking ----

/// Network output: a 189-bin distribution over 35-200 bpm plus the pulse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoSpectrum {
    pub probs: Vec<f64>,
    pub pulse: Vec<f64>,
}

impl PseudoSpectrum {
    pub fn bin_to_bpm(k: usize) -> f64 {
        fftbank::bin_to_bpm(k)
    }
}

/// One HR estimate with its peak-ratio confidence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HrEstimate {
    pub bpm: f64,
    /// Ratio of the main peak to the second peak; infinite when no second
    /// peak exists.
    pub confidence: f64,
    pub window_center: f64,
}

/// Exclusion half-width around the main peak when searching for the second
/// peak, bins.
const SECOND_PEAK_EXCLUSION: usize = 3;

/// Picks the HR as the pseudo-spectrum argmax; confidence is the ratio to
/// the strongest local maximum outside +-3 bins (falling back to the plain
/// maximum outside the exclusion zone when no interior local maximum
/// exists).
pub fn pick_hr(spec: &PseudoSpectrum, window_center: f64) -> HrEstimate {
    let p = &spec.probs;
    let argmax = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let p_max = p[argmax];

    let excluded =
        |i: usize| (i as i64 - argmax as i64).unsigned_abs() as usize <= SECOND_PEAK_EXCLUSION;
    let mut second = 0.0f64;
    let mut found_local = false;
    for i in 0..p.len() {
        if excluded(i) {
            continue;
        }
        let left_ok = i == 0 || p[i] >= p[i - 1];
        let right_ok = i + 1 == p.len() || p[i] >= p[i + 1];
        if left_ok && right_ok {
            found_local = true;
            if p[i] > second {
                second = p[i];
            }
        }
    }
    if !found_local {
        for i in 0..p.len() {
            if !excluded(i) && p[i] > second {
                second = p[i];
            }
        }
    }
    let confidence = if second > 0.0 { p_max / second } else { f64::INFINITY };
    HrEstimate {
        bpm: fftbank::bin_to_bpm(argmax),
        confidence,
        window_center,
    }
}

// ---- Manifest file ----

pub const MODEL_MAGIC: &[u8; 4] = b"RVSM";
pub const MODEL_VERSION: u32 = 1;

/// JSON header of a model file; the weight blob follows it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub version: u32,
    pub profile: String,
    pub sample_rate_hz: f64,
    pub spec: ModelSpec,
    pub total_params: usize,
    pub trainable_params: usize,
}

/// Serializes the manifest header plus the little-endian f32 blob
/// (trainable parameters, then moving statistics).
pub fn save_model<P: AsRef<Path>>(
    path: P,
    net: &PulseNet<f32>,
    profile: &str,
) -> Result<(), NetError> {
    let manifest = ModelManifest {
        version: MODEL_VERSION,
        profile: profile.to_string(),
        sample_rate_hz: fftbank::REQUIRED_RATE_HZ,
        spec: net.spec.clone(),
        total_params: net.total_params(),
        trainable_params: net.trainable_params(),
    };
    let header = serde_json::to_vec(&manifest).map_err(|e| NetError::Header(e.to_string()))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MODEL_MAGIC)?;
    f.write_all(&(header.len() as u32).to_le_bytes())?;
    f.write_all(&header)?;
    for v in net.params.iter().chain(net.state.iter()) {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Loads a model file saved by [`save_model`], verifying counts.
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<(PulseNet<f32>, ModelManifest), NetError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(NetError::BadMagic);
    }
    let mut len4 = [0u8; 4];
    f.read_exact(&mut len4)?;
    let hlen = u32::from_le_bytes(len4) as usize;
    let mut header = vec![0u8; hlen];
    f.read_exact(&mut header)?;
    let manifest: ModelManifest =
        serde_json::from_slice(&header).map_err(|e| NetError::Header(e.to_string()))?;
    let mut net = PulseNet::<f32>::new(manifest.spec.clone())?;
    if net.total_params() != manifest.total_params
        || net.trainable_params() != manifest.trainable_params
    {
        return Err(NetError::Header("parameter counts disagree with spec".into()));
    }
    let mut blob = Vec::new();
    f.read_to_end(&mut blob)?;
    if blob.len() != 4 * net.total_params() {
        return Err(NetError::BlobSize);
    }
    let mut vals = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for slot in net.params.iter_mut() {
        *slot = vals.next().unwrap();
    }
    for slot in net.state.iter_mut() {
        *slot = vals.next().unwrap();
    }
    Ok((net, manifest))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::fftbank::SPECTRUM_BINS;
    use super::*;
    use crate::rng::Rng;

    pub(crate) fn tiny_spec(len: usize) -> ModelSpec {
        ModelSpec {
            input_len: len,
            branches: MICROMOTION_BINS,
            branch_layers: vec![
                ResNetSpec { in_ch: 1, out_ch: 2, kernel: 3 },
                ResNetSpec { in_ch: 2, out_ch: 2, kernel: 3 },
            ],
            post_sum: ResNetSpec { in_ch: 2, out_ch: 2, kernel: 3 },
            out_conv: ConvSpec { in_ch: 2, out_ch: 1, kernel: 3 },
            pre_fft: ResNetSpec { in_ch: 1, out_ch: 1, kernel: 3 },
            spectrum_layers: vec![
                ResNetSpec { in_ch: BANK_ROWS, out_ch: 3, kernel: 3 },
                ResNetSpec { in_ch: 3, out_ch: 2, kernel: 3 },
            ],
            proj: ConvSpec { in_ch: 2, out_ch: 1, kernel: 1 },
        }
    }

    /// Independent parameter-counting routine, straight from the layer
    /// formulas rather than the allocator.
    fn count_oracle(spec: &ModelSpec) -> (usize, usize) {
        let conv = |s: &ConvSpec| s.out_ch * (s.in_ch * s.kernel + 1);
        let resnet = |s: &ResNetSpec| {
            let mut p = s.out_ch * (s.in_ch * s.kernel + 1); // conv1
            p += 2 * s.out_ch; // bn1 gamma/beta
            p += s.out_ch * s.kernel; // depthwise
            p += s.out_ch * (s.out_ch + 1); // pointwise
            p += 2 * s.out_ch; // bn2
            if s.in_ch != s.out_ch {
                p += s.out_ch * (s.in_ch + 1); // shortcut projection
            }
            p
        };
        let resnet_state = |s: &ResNetSpec| 4 * s.out_ch;
        let mut params = 0;
        let mut state = 0;
        for l in &spec.branch_layers {
            params += resnet(l);
            state += resnet_state(l);
        }
        params += resnet(&spec.post_sum) + conv(&spec.out_conv) + resnet(&spec.pre_fft);
        state += resnet_state(&spec.post_sum) + resnet_state(&spec.pre_fft);
        for l in &spec.spectrum_layers {
            params += resnet(l);
            state += resnet_state(l);
        }
        params += conv(&spec.proj);
        (params, state)
    }

    #[test]
    fn default_spec_lands_in_parameter_band() {
        let spec = ModelSpec::default_for_len(900);
        let net = PulseNet::<f32>::new(spec.clone()).unwrap();
        let (p, s) = count_oracle(&spec);
        assert_eq!(net.trainable_params(), p);
        assert_eq!(net.total_params(), p + s);
        assert!(
            (8000..=12000).contains(&net.total_params()),
            "total {}",
            net.total_params()
        );
        assert!(net.trainable_params() < net.total_params());
    }

    #[test]
    fn layout_counts_match_oracle_on_tiny_spec() {
        let spec = tiny_spec(32);
        let net = PulseNet::<f64>::new(spec.clone()).unwrap();
        let (p, s) = count_oracle(&spec);
        assert_eq!(net.trainable_params(), p);
        assert_eq!(net.total_params() - net.trainable_params(), s);
    }

    fn random_motions(rng: &mut Rng, len: usize) -> MicroMotionSet {
        MicroMotionSet {
            waveforms: (0..MICROMOTION_BINS)
                .map(|_| (0..len).map(|_| rng.normal() * 1e-3).collect())
                .collect(),
            bin_indices: (0..MICROMOTION_BINS).collect(),
            sample_rate: 15.0,
            clamped: false,
        }
    }

    #[test]
    fn branch_permutation_invariance() {
        let mut rng = Rng::new(7);
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        net.init_weights(1);
        let motions = random_motions(&mut rng, 32);
        let a = net.infer(&motions).unwrap();

        let mut permuted = motions.clone();
        permuted.waveforms.rotate_left(5);
        permuted.waveforms.swap(0, 9);
        let b = net.infer(&permuted).unwrap();
        // The sum over branches is commutative; only f32 accumulation order
        // differs, so outputs agree to rounding.
        for (x, y) in a.probs.iter().zip(b.probs.iter()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        for (x, y) in a.pulse.iter().zip(b.pulse.iter()) {
            assert!((x - y).abs() < 1e-4 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn zero_input_zero_biases_zero_pulse() {
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        net.init_weights(3);
        // Biases are zero after init; a zero input stays zero through conv,
        // fresh batch norm (mean 0, var 1) and ReLU.
        let motions = MicroMotionSet {
            waveforms: vec![vec![0.0; 32]; MICROMOTION_BINS],
            bin_indices: (0..MICROMOTION_BINS).collect(),
            sample_rate: 15.0,
            clamped: false,
        };
        let out = net.infer(&motions).unwrap();
        for v in &out.pulse {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn zero_weights_zero_output() {
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        // All parameters zero, including gammas.
        let mut rng = Rng::new(5);
        let motions = random_motions(&mut rng, 32);
        let out = net.infer(&motions).unwrap();
        for v in &out.pulse {
            assert_eq!(*v, 0.0);
        }
        // Uniform logits -> uniform probabilities.
        for p in &out.probs {
            assert!((p - 1.0 / SPECTRUM_BINS as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_normalizes_and_shift_invariant() {
        let mut rng = Rng::new(11);
        let logits: Vec<f64> = (0..SPECTRUM_BINS).map(|_| rng.normal()).collect();
        let b = Batch::from_vec(logits.clone(), 1, 1, SPECTRUM_BINS);
        let p = softmax_rows(&b);
        let sum: f64 = p.row(0, 0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);

        let shifted: Vec<f64> = logits.iter().map(|v| v + 17.0).collect();
        let p2 = softmax_rows(&Batch::from_vec(shifted, 1, 1, SPECTRUM_BINS));
        for (a, b) in p.row(0, 0).iter().zip(p2.row(0, 0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn input_scaling_does_not_change_inference() {
        // Per-waveform normalization absorbs positive scaling, so inference
        // is exactly scale invariant.
        let mut rng = Rng::new(13);
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        net.init_weights(2);
        let motions = random_motions(&mut rng, 32);
        let a = net.infer(&motions).unwrap();
        let mut scaled = motions.clone();
        for w in scaled.waveforms.iter_mut() {
            for v in w.iter_mut() {
                *v *= 250.0;
            }
        }
        let b = net.infer(&scaled).unwrap();
        let argmax = |p: &[f64]| {
            p.iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(&a.probs), argmax(&b.probs));
        for (x, y) in a.probs.iter().zip(b.probs.iter()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn pick_hr_one_hot() {
        let mut probs = vec![0.0; SPECTRUM_BINS];
        probs[28] = 1.0;
        let est = pick_hr(&PseudoSpectrum { probs, pulse: vec![] }, 60.0);
        assert!((est.bpm - 59.765625).abs() < 1e-9);
        assert!(est.confidence.is_infinite());
    }

    #[test]
    fn pick_hr_two_equal_peaks() {
        let mut probs = vec![0.0; SPECTRUM_BINS];
        probs[30] = 0.5;
        probs[90] = 0.5;
        let est = pick_hr(&PseudoSpectrum { probs, pulse: vec![] }, 0.0);
        assert!((est.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pick_hr_uniform_low_confidence() {
        let probs = vec![1.0 / SPECTRUM_BINS as f64; SPECTRUM_BINS];
        let est = pick_hr(&PseudoSpectrum { probs, pulse: vec![] }, 0.0);
        assert!((est.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hr_estimate_stays_in_band() {
        let mut rng = Rng::new(99);
        for _ in 0..50 {
            let probs: Vec<f64> = (0..SPECTRUM_BINS).map(|_| rng.uniform()).collect();
            let est = pick_hr(&PseudoSpectrum { probs, pulse: vec![] }, 0.0);
            assert!((35.1..200.5).contains(&est.bpm));
        }
    }

    #[test]
    fn manifest_round_trip_bit_exact() {
        let dir = std::env::temp_dir().join("rvs_model_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.rvsm");
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        net.init_weights(77);
        // Perturb state so it is not the fresh default.
        for v in net.state.iter_mut() {
            *v += 0.125;
        }
        save_model(&path, &net, "sleep").unwrap();
        let (loaded, manifest) = load_model(&path).unwrap();
        assert_eq!(manifest.profile, "sleep");
        assert_eq!(manifest.trainable_params, net.trainable_params());
        assert_eq!(net.params, loaded.params);
        assert_eq!(net.state, loaded.state);

        // Corrupt the magic.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(NetError::BadMagic)));
    }

    #[test]
    fn resnet_shortcut_path_passes_input() {
        // Zero main-path weights and an identity-like projection: the block
        // reduces to ReLU of the shortcut output.
        let mut net = PulseNet::<f32>::new(tiny_spec(16)).unwrap();
        // Branch layer 0: 1 -> 2 channels with a projection shortcut.
        let block = net.layout.branch[0].clone();
        let sc = block.shortcut.clone().expect("projection expected");
        // Projection kernel 1: out channel c copies the single input channel.
        for i in sc.w.clone() {
            net.params[i] = 1.0;
        }
        let x = Batch::from_vec(
            (0..16).map(|v| (v as f32 - 8.0) * 0.25).collect(),
            1,
            1,
            16,
        );
        let (out, _) = net.resnet_forward(ResNetSel::Branch(0), x.clone(), Mode::Infer);
        for c in 0..2 {
            for (o, v) in out.row(0, c).iter().zip(x.row(0, 0)) {
                assert_eq!(*o, v.max(0.0), "channel {c}");
            }
        }
    }

    #[test]
    fn bn_state_updates_only_in_training() {
        let mut rng = Rng::new(8);
        let mut net = PulseNet::<f32>::new(tiny_spec(16)).unwrap();
        net.init_weights(4);
        let motions = random_motions(&mut rng, 16);
        let state_before = net.state.clone();
        let _ = net.infer(&motions).unwrap();
        assert_eq!(net.state, state_before, "inference must not touch moving stats");

        let input = normalize_motions::<f32>(&motions, 16).unwrap();
        let _ = net.forward(&input, Mode::Train).unwrap();
        assert_ne!(net.state, state_before, "training must update moving stats");
        // And inference remains a pure function of (params, state).
        let a = net.infer(&motions).unwrap();
        let b = net.infer(&motions).unwrap();
        assert_eq!(a.probs, b.probs);
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let mut net = PulseNet::<f32>::new(tiny_spec(32)).unwrap();
        let bad = Batch::<f32>::zeros(1, MICROMOTION_BINS, 16);
        assert!(matches!(net.forward(&bad, Mode::Infer), Err(NetError::Shape(_))));
        let motions = MicroMotionSet {
            waveforms: vec![vec![0.0; 32]; 3],
            bin_indices: vec![0, 1, 2],
            sample_rate: 15.0,
            clamped: false,
        };
        assert!(matches!(net.infer(&motions), Err(NetError::Shape(_))));
    }
}
