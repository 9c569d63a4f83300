//! Label construction, losses and the Adam training loop.
//!
//! Labels follow the ground-truth beat times: the waveform target is a train
//! of unit-peak Gaussian pulses (sigma 50 ms) and the spectrum target is a
//! Gaussian bump (sigma 1.5 bins) at the window's reference HR, normalized
//! to sum 1. The loss is MSE on the pulse plus lambda times cross-entropy on
//! the pseudo-spectrum. Training is bit-deterministic in the seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::fftbank::{bin_to_bpm, bpm_to_bin, SPECTRUM_BINS};
use crate::net::layers::Batch;
use crate::net::{Mode, NetCaches, NetError, PulseNet};
use crate::num::Real;
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bpm {0} outside the 35.2-200.4 bpm label band")]
    BpmOutOfBand(f64),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("training diverged (non-finite loss) at step {0}")]
    Diverged(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Gaussian pulse width of the waveform labels, s.
pub const LABEL_PULSE_SIGMA_S: f64 = 0.05;
/// Gaussian width of the spectrum labels, bins.
pub const LABEL_SPECTRUM_SIGMA_BINS: f64 = 1.5;
/// Epsilon inside the cross-entropy logarithm.
pub const CE_EPS: f64 = 1e-12;

/// Unit-peak Gaussian pulse train sampled on the window grid `n / rate`;
/// beat times are window-relative seconds.
pub fn label_waveform(beat_times: &[f64], len: usize, rate: f64) -> Vec<f64> {
    let sigma = LABEL_PULSE_SIGMA_S;
    let mut out = vec![0.0; len];
    for (n, slot) in out.iter_mut().enumerate() {
        let t = n as f64 / rate;
        for &b in beat_times {
            let x = (t - b) / sigma;
            if x.abs() < 8.0 {
                *slot += (-0.5 * x * x).exp();
            }
        }
    }
    out
}

/// Gaussian bump centered at the HR's continuous bin coordinate,
/// renormalized to sum 1.
pub fn label_spectrum(bpm: f64) -> Result<Vec<f64>, TrainError> {
    let center = bpm_to_bin(bpm);
    if !(0.0..=(SPECTRUM_BINS as f64 - 1.0)).contains(&center) {
        return Err(TrainError::BpmOutOfBand(bpm));
    }
    let mut out = vec![0.0; SPECTRUM_BINS];
    let s2 = 2.0 * LABEL_SPECTRUM_SIGMA_BINS * LABEL_SPECTRUM_SIGMA_BINS;
    for (k, slot) in out.iter_mut().enumerate() {
        let d = k as f64 - center;
        *slot = (-d * d / s2).exp();
    }
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// One training window.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    /// Normalized waveforms, `[1][16][len]`.
    pub input: Batch<f32>,
    pub label_pulse: Vec<f32>,
    pub label_spectrum: Vec<f32>,
    pub scene_id: u64,
    pub window_center: f64,
    /// True when the scene belongs to the harmonic-stress subset.
    pub stress: bool,
    /// Reference HR of the window, bpm.
    pub truth_bpm: f64,
}

/// MSE(pulse) + lambda * CE(spectrum) for one example.
pub fn loss<T: Real>(
    pred_pulse: &[T],
    pred_probs: &[T],
    label_pulse: &[T],
    label_spectrum: &[T],
    lambda_mix: f64,
) -> f64 {
    debug_assert_eq!(pred_pulse.len(), label_pulse.len());
    debug_assert_eq!(pred_probs.len(), label_spectrum.len());
    let mut mse = 0.0;
    for (p, y) in pred_pulse.iter().zip(label_pulse.iter()) {
        let d = p.to_f64_lossy() - y.to_f64_lossy();
        mse += d * d;
    }
    mse /= pred_pulse.len() as f64;
    let mut ce = 0.0;
    for (p, y) in pred_probs.iter().zip(label_spectrum.iter()) {
        ce -= y.to_f64_lossy() * (p.to_f64_lossy() + CE_EPS).ln();
    }
    mse + lambda_mix * ce
}

/// Loss gradients for a batch: returns (d/d pulse, d/d logits) with the
/// 1/n batch-mean factor folded in. `probs` are the softmax outputs.
pub fn loss_gradients<T: Real>(
    pulse: &Batch<T>,
    probs: &Batch<T>,
    labels_pulse: &[Vec<T>],
    labels_spectrum: &[Vec<T>],
    lambda_mix: f64,
) -> (Batch<T>, Batch<T>) {
    let n = pulse.n;
    let len = pulse.len;
    let inv_n = T::from_f64_lossy(1.0 / n as f64);
    let lambda = T::from_f64_lossy(lambda_mix);
    let eps = T::from_f64_lossy(CE_EPS);

    let mut g_pulse = Batch::zeros(n, 1, len);
    let two_over_l = T::from_f64_lossy(2.0 / len as f64);
    for i in 0..n {
        let p = pulse.row(i, 0).to_vec();
        let g = g_pulse.row_mut(i, 0);
        for l in 0..len {
            g[l] = two_over_l * (p[l] - labels_pulse[i][l]) * inv_n;
        }
    }

    let bins = probs.len;
    let mut g_logits = Batch::zeros(n, 1, bins);
    for i in 0..n {
        let p = probs.row(i, 0).to_vec();
        // dL/dp_k = -lambda * y_k / (p_k + eps) / n, then the softmax
        // Jacobian-vector product dz = p .* (gp - <gp, p>).
        let mut gp = vec![T::zero(); bins];
        for k in 0..bins {
            gp[k] = -lambda * labels_spectrum[i][k] / (p[k] + eps) * inv_n;
        }
        let mut dot = T::zero();
        for k in 0..bins {
            dot += gp[k] * p[k];
        }
        let g = g_logits.row_mut(i, 0);
        for k in 0..bins {
            g[k] = p[k] * (gp[k] - dot);
        }
    }
    (g_pulse, g_logits)
}

/// Batch-mean loss over examples (matches [`loss_gradients`]).
pub fn batch_loss<T: Real>(
    pulse: &Batch<T>,
    probs: &Batch<T>,
    labels_pulse: &[Vec<T>],
    labels_spectrum: &[Vec<T>],
    lambda_mix: f64,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..pulse.n {
        acc += loss(
            pulse.row(i, 0),
            probs.row(i, 0),
            &labels_pulse[i],
            &labels_spectrum[i],
            lambda_mix,
        );
    }
    acc / pulse.n as f64
}

/// Adam optimizer state; moment arrays shape-match the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub step: usize,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f32], grads: &[f32], lr: f32) {
        const B1: f32 = 0.9;
        const B2: f32 = 0.999;
        const EPS: f32 = 1e-8;
        self.step += 1;
        let t = self.step as f32;
        let c1 = 1.0 - B1.powf(t);
        let c2 = 1.0 - B2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of scenes held out for validation (by scene id).
    pub val_fraction: f64,
    pub lambda_mix: f64,
    /// Early-stop patience on validation cross-entropy, epochs.
    pub patience: usize,
    /// Step decay: multiply the rate by `lr_decay` every `lr_decay_every`
    /// epochs (0 disables).
    pub lr_decay_every: usize,
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            epochs: 100,
            seed: 1,
            val_fraction: 0.15,
            lambda_mix: 1.0,
            patience: 10,
            lr_decay_every: 0,
            lr_decay: 0.3,
        }
    }
}

/// Per-epoch statistics, serialized as one JSON line each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_ce: f64,
    pub val_mae_bpm: f64,
}

/// Trains the network in place; restores the best-validation weights before
/// returning the log.
pub fn train(
    net: &mut PulseNet<f32>,
    corpus: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    // Deterministic split by scene id.
    let mut ids: Vec<u64> = corpus.iter().map(|e| e.scene_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = Rng::new(cfg.seed);
    rng.shuffle(&mut ids);
    let n_val_scenes = ((ids.len() as f64 * cfg.val_fraction).round() as usize).min(ids.len() - 1);
    let val_ids: std::collections::BTreeSet<u64> = ids[..n_val_scenes].iter().copied().collect();
    let train_idx: Vec<usize> = (0..corpus.len())
        .filter(|&i| !val_ids.contains(&corpus[i].scene_id))
        .collect();
    let val_idx: Vec<usize> = (0..corpus.len())
        .filter(|&i| val_ids.contains(&corpus[i].scene_id))
        .collect();

    let mut adam = AdamState::new(net.trainable_params());
    let mut log = Vec::new();
    let mut best: Option<(f64, Vec<f32>, Vec<f32>)> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        let mut erng = Rng::new(crate::rng::child_seed(cfg.seed, 1000 + epoch as u64));
        erng.shuffle(&mut order);

        let lr = if cfg.lr_decay_every > 0 {
            cfg.lr * cfg.lr_decay.powi((epoch / cfg.lr_decay_every) as i32)
        } else {
            cfg.lr
        };
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (l, grads) = batch_forward_backward(net, corpus, chunk, cfg.lambda_mix)?;
            step += 1;
            if !l.is_finite() {
                return Err(TrainError::Diverged(step));
            }
            adam.update(&mut net.params, &grads, lr as f32);
            epoch_loss += l;
            batches += 1;
        }
        epoch_loss /= batches.max(1) as f64;

        let eval_idx = if val_idx.is_empty() { &train_idx } else { &val_idx };
        let (val_loss, val_ce, val_mae) = evaluate(net, corpus, eval_idx, cfg.lambda_mix)?;
        log.push(EpochStats {
            epoch,
            train_loss: epoch_loss,
            val_loss,
            val_ce,
            val_mae_bpm: val_mae,
        });

        let better = best.as_ref().map_or(true, |(b, _, _)| val_ce < *b);
        if better {
            best = Some((val_ce, net.params.clone(), net.state.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    if let Some((_, params, state)) = best {
        net.params = params;
        net.state = state;
    }
    Ok(log)
}

/// Forward + backward over one batch; returns (mean loss, gradient).
fn batch_forward_backward(
    net: &mut PulseNet<f32>,
    corpus: &[TrainingExample],
    idx: &[usize],
    lambda_mix: f64,
) -> Result<(f64, Vec<f32>), TrainError> {
    let (input, labels_pulse, labels_spectrum) = gather(corpus, idx);
    let (pulse, probs, caches) = net.forward(&input, Mode::Train)?;
    let caches: NetCaches<f32> = caches.expect("train mode caches");
    let l = batch_loss(&pulse, &probs, &labels_pulse, &labels_spectrum, lambda_mix);
    let (g_pulse, g_logits) =
        loss_gradients(&pulse, &probs, &labels_pulse, &labels_spectrum, lambda_mix);
    let grads = net.backward(&caches, &g_pulse, &g_logits);
    Ok((l, grads))
}

fn gather(
    corpus: &[TrainingExample],
    idx: &[usize],
) -> (Batch<f32>, Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let first = &corpus[idx[0]];
    let (ch, len) = (first.input.ch, first.input.len);
    let mut input = Batch::zeros(idx.len(), ch, len);
    let mut lp = Vec::with_capacity(idx.len());
    let mut ls = Vec::with_capacity(idx.len());
    for (slot, &i) in idx.iter().enumerate() {
        let e = &corpus[i];
        for c in 0..ch {
            input.row_mut(slot, c).copy_from_slice(e.input.row(0, c));
        }
        lp.push(e.label_pulse.clone());
        ls.push(e.label_spectrum.clone());
    }
    (input, lp, ls)
}

/// Inference-mode evaluation: (mean loss, mean CE, MAE of the argmax bpm).
pub fn evaluate(
    net: &mut PulseNet<f32>,
    corpus: &[TrainingExample],
    idx: &[usize],
    lambda_mix: f64,
) -> Result<(f64, f64, f64), TrainError> {
    let mut total = 0.0;
    let mut total_ce = 0.0;
    let mut mae = 0.0;
    for &i in idx {
        let e = &corpus[i];
        let (pulse, probs, _) = net.forward(&e.input, Mode::Infer)?;
        total += loss(
            pulse.row(0, 0),
            probs.row(0, 0),
            &e.label_pulse,
            &e.label_spectrum,
            lambda_mix,
        );
        let mut ce = 0.0;
        for (p, y) in probs.row(0, 0).iter().zip(e.label_spectrum.iter()) {
            ce -= *y as f64 * ((*p as f64) + CE_EPS).ln();
        }
        total_ce += ce;
        let argmax = probs
            .row(0, 0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        mae += (bin_to_bpm(argmax) - e.truth_bpm).abs();
    }
    let n = idx.len().max(1) as f64;
    Ok((total / n, total_ce / n, mae / n))
}
