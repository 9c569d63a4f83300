//! Noncontact heart-rate detection for a short-range FMCW radar.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`config`] — sensor configuration and derived physical quantities
//! - [`scene`] / [`corpus`] — synthetic scenes with exact ground truth
//! - [`frontend`] — burst averaging, range FFT, clutter filter, CFAR
//!   presence detection and Doppler stillness gating
//! - [`micromotion`] — MRC beamforming, circle fitting and phase-based
//!   displacement extraction around the detected range
//! - [`net`] — forward inference for the lightweight two-block pulse
//!   network (shared-weight branches, multi-resolution FFT bank,
//!   pseudo-spectrum head)
//! - [`train`] — labels, losses, reverse-mode gradients and an Adam loop
//! - [`baseline`] — the conventional band-pass / FT / PAR comparison chain
//! - [`track`] — HR series post-processing and the metrics suite
//! - [`session`] — the `RVS1` session container, label files and run config
//! - [`pipeline`] — windowed orchestration from range profiles to HR series
//!
//! Numeric kernels (FFT, filters, network layers) are generic over the
//! scalar type via [`num::Real`]; the aliases below pin the concrete
//! precision used by the shipped pipeline.

pub mod baseline;
pub mod config;
pub mod corpus;
pub mod crc32;
pub mod fft;
pub mod frontend;
pub mod micromotion;
pub mod net;
pub mod num;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod session;
pub mod track;
pub mod train;

/// Scalar used by the signal-processing chain.
pub type DspFloat = f64;
/// Scalar used for network weights and file payloads.
pub type NetFloat = f32;

/// Complex sample of the signal-processing chain.
pub type DspComplex = num_complex::Complex<DspFloat>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
