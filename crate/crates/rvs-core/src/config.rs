//! Sensor configuration, derived physical quantities, and the shared
//! complex-sample containers used by every downstream stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{DspComplex, DspFloat, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("bandwidth must be positive (f_high > f_low)")]
    NonPositiveBandwidth,
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
}

/// Chirp/burst/antenna parameters of the sensor.
///
/// The default instance reproduces the 60 GHz chip used throughout:
/// 58–63.5 GHz sweep, 2 MHz ADC, 256 samples per chirp, 20 chirps per burst,
/// 3000 Hz chirp rate, 30 Hz burst rate, three receivers in an L shape with
/// 2.5 mm spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Sweep start frequency, Hz.
    pub f_low: f64,
    /// Sweep stop frequency, Hz.
    pub f_high: f64,
    /// Transmit power, W.
    pub tx_power: f64,
    /// ADC sampling rate, samples/s.
    pub adc_rate: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_burst: usize,
    /// Chirp repetition rate, chirps/s.
    pub chirp_rate: f64,
    /// Burst repetition rate, bursts/s.
    pub burst_rate: f64,
    pub rx_count: usize,
    /// Receiver positions in the array plane, m.
    pub rx_positions: Vec<[f64; 2]>,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let d = 2.5e-3;
        RadarConfig {
            f_low: 58.0e9,
            f_high: 63.5e9,
            tx_power: 5.0e-3,
            adc_rate: 2.0e6,
            samples_per_chirp: 256,
            chirps_per_burst: 20,
            chirp_rate: 3000.0,
            burst_rate: 30.0,
            rx_count: 3,
            // L shape, axis aligned: rx1 along x, rx2 along y.
            rx_positions: vec![[0.0, 0.0], [d, 0.0], [0.0, d]],
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.f_high <= self.f_low {
            return Err(ConfigError::NonPositiveBandwidth);
        }
        if self.adc_rate <= 0.0 {
            return Err(ConfigError::Invalid("adc_rate must be positive"));
        }
        if self.samples_per_chirp == 0 || self.chirps_per_burst == 0 || self.rx_count == 0 {
            return Err(ConfigError::Invalid("counts must be >= 1"));
        }
        if self.rx_positions.len() != self.rx_count {
            return Err(ConfigError::Invalid("rx_positions length != rx_count"));
        }
        if self.chirp_rate < 0.0 || self.burst_rate < 0.0 {
            return Err(ConfigError::Invalid("rates must be non-negative"));
        }
        Ok(())
    }

    /// Sweep bandwidth B, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.f_high - self.f_low
    }

    /// Center frequency f0, Hz.
    pub fn center_frequency(&self) -> f64 {
        0.5 * (self.f_low + self.f_high)
    }

    /// Chirp duration implied by the ADC (samples / rate), s.
    pub fn chirp_duration(&self) -> f64 {
        self.samples_per_chirp as f64 / self.adc_rate
    }

    /// Sweep slope B / T_chirp, Hz/s.
    pub fn chirp_slope(&self) -> f64 {
        self.bandwidth() / self.chirp_duration()
    }

    /// Decimated profile rate after burst-pair averaging, profiles/s.
    pub fn decimated_rate(&self) -> f64 {
        self.burst_rate / 2.0
    }

    /// Time offset of decimated profile 0: the mean chirp time of the two
    /// bursts averaged into it. Simulator ground truth samples displacement
    /// at exactly these instants.
    pub fn decimated_start_offset(&self) -> f64 {
        0.5 / self.burst_rate + 0.5 * (self.chirps_per_burst as f64 - 1.0) / self.chirp_rate
    }
}

/// Range resolution c/(2B), m.
pub fn range_resolution(config: &RadarConfig) -> Result<f64, ConfigError> {
    let b = config.bandwidth();
    if b <= 0.0 {
        return Err(ConfigError::NonPositiveBandwidth);
    }
    Ok(SPEED_OF_LIGHT / (2.0 * b))
}

/// Active duty cycle: fraction of time the ADC is sampling.
pub fn duty_cycle(config: &RadarConfig) -> Result<f64, ConfigError> {
    if config.adc_rate <= 0.0 {
        return Err(ConfigError::Invalid("adc_rate must be positive"));
    }
    let samples_per_burst = (config.samples_per_chirp * config.chirps_per_burst) as f64;
    Ok(samples_per_burst * config.burst_rate / config.adc_rate)
}

/// Carrier wavelength c/f0, m.
pub fn wavelength(config: &RadarConfig) -> f64 {
    SPEED_OF_LIGHT / config.center_frequency()
}

/// Raw ADC samples: `[burst][chirp][receiver][sample]`.
#[derive(Debug, Clone)]
pub struct AdcCube {
    pub config: RadarConfig,
    pub bursts: usize,
    samples: Vec<DspFloat>,
}

impl AdcCube {
    pub fn zeroed(config: RadarConfig, bursts: usize) -> Self {
        let n = bursts * config.chirps_per_burst * config.rx_count * config.samples_per_chirp;
        AdcCube {
            config,
            bursts,
            samples: vec![0.0; n],
        }
    }

    pub fn from_samples(
        config: RadarConfig,
        bursts: usize,
        samples: Vec<DspFloat>,
    ) -> Result<Self, ConfigError> {
        let expect = bursts * config.chirps_per_burst * config.rx_count * config.samples_per_chirp;
        if samples.len() != expect {
            return Err(ConfigError::Invalid("ADC sample count does not match dimensions"));
        }
        Ok(AdcCube {
            config,
            bursts,
            samples,
        })
    }

    #[inline]
    fn index(&self, burst: usize, chirp: usize, rx: usize, sample: usize) -> usize {
        ((burst * self.config.chirps_per_burst + chirp) * self.config.rx_count + rx)
            * self.config.samples_per_chirp
            + sample
    }

    #[inline]
    pub fn get(&self, burst: usize, chirp: usize, rx: usize, sample: usize) -> DspFloat {
        self.samples[self.index(burst, chirp, rx, sample)]
    }

    #[inline]
    pub fn set(&mut self, burst: usize, chirp: usize, rx: usize, sample: usize, v: DspFloat) {
        let i = self.index(burst, chirp, rx, sample);
        self.samples[i] = v;
    }

    /// One chirp as a contiguous slice of fast-time samples.
    pub fn chirp(&self, burst: usize, chirp: usize, rx: usize) -> &[DspFloat] {
        let start = self.index(burst, chirp, rx, 0);
        &self.samples[start..start + self.config.samples_per_chirp]
    }

    pub fn raw_samples(&self) -> &[DspFloat] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.bursts == 0
    }
}

/// Time sequence of complex range profiles per receiver:
/// `[time][receiver][range_bin]`.
#[derive(Debug, Clone)]
pub struct RangeProfileSeries {
    profiles: Vec<DspComplex>,
    pub len: usize,
    pub rx_count: usize,
    pub bins: usize,
    /// Profiles per second.
    pub sample_rate: f64,
    /// Range bin spacing c/(2B), m.
    pub range_bin_size: f64,
    /// Timestamp of profile 0, s.
    pub start_time: f64,
}

impl RangeProfileSeries {
    pub fn zeroed(
        len: usize,
        rx_count: usize,
        bins: usize,
        sample_rate: f64,
        range_bin_size: f64,
        start_time: f64,
    ) -> Self {
        RangeProfileSeries {
            profiles: vec![DspComplex::new(0.0, 0.0); len * rx_count * bins],
            len,
            rx_count,
            bins,
            sample_rate,
            range_bin_size,
            start_time,
        }
    }

    #[inline]
    fn index(&self, t: usize, rx: usize, bin: usize) -> usize {
        (t * self.rx_count + rx) * self.bins + bin
    }

    #[inline]
    pub fn get(&self, t: usize, rx: usize, bin: usize) -> DspComplex {
        self.profiles[self.index(t, rx, bin)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, rx: usize, bin: usize, v: DspComplex) {
        let i = self.index(t, rx, bin);
        self.profiles[i] = v;
    }

    /// One profile (all bins) for a receiver at time `t`.
    pub fn profile(&self, t: usize, rx: usize) -> &[DspComplex] {
        let start = self.index(t, rx, 0);
        &self.profiles[start..start + self.bins]
    }

    pub fn profile_mut(&mut self, t: usize, rx: usize) -> &mut [DspComplex] {
        let start = self.index(t, rx, 0);
        &mut self.profiles[start..start + self.bins]
    }

    /// Timestamp of profile `t`.
    pub fn time_of(&self, t: usize) -> f64 {
        self.start_time + t as f64 / self.sample_rate
    }

    /// Duration covered by the series, s.
    pub fn duration(&self) -> f64 {
        self.len as f64 / self.sample_rate
    }

    /// The complex series of a single range bin for one receiver.
    pub fn bin_series(&self, rx: usize, bin: usize) -> Vec<DspComplex> {
        (0..self.len).map(|t| self.get(t, rx, bin)).collect()
    }

    /// A contiguous time slice `[t0, t1)` of the series.
    pub fn slice_time(&self, t0: usize, t1: usize) -> RangeProfileSeries {
        assert!(t0 <= t1 && t1 <= self.len);
        let start = self.index(t0, 0, 0);
        let end = self.index(t1.saturating_sub(1), self.rx_count - 1, self.bins - 1) + 1;
        let profiles = if t1 > t0 {
            self.profiles[start..end].to_vec()
        } else {
            Vec::new()
        };
        RangeProfileSeries {
            profiles,
            len: t1 - t0,
            rx_count: self.rx_count,
            bins: self.bins,
            sample_rate: self.sample_rate,
            range_bin_size: self.range_bin_size,
            start_time: self.time_of(t0),
        }
    }

    pub fn raw(&self) -> &[DspComplex] {
        &self.profiles
    }

    pub fn raw_mut(&mut self) -> &mut [DspComplex] {
        &mut self.profiles
    }
}
