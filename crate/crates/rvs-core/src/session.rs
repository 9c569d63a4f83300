//! Session container and label files.
//!
//! A session file starts with the magic `RVS1`, a little-endian u32 header
//! length, a JSON header (radar config, payload kind, dimensions, payload
//! CRC-32), and then the payload as little-endian f32 values: raw ADC
//! samples for `adc` payloads, interleaved (re, im) range profiles for
//! `decimated` payloads. Labels live next to a session as
//! `<name>.labels.json`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AdcCube, RadarConfig, RangeProfileSeries};
use crate::crc32::crc32;
use crate::scene::{SceneSpec, WindowTruth};
use crate::track::Profile;
use crate::DspComplex;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad container magic")]
    BadMagic,
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("payload checksum mismatch")]
    ChecksumMismatch,
    #[error("header dimensions do not match payload size")]
    DimensionMismatch,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
}

pub const SESSION_MAGIC: &[u8; 4] = b"RVS1";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Adc,
    Decimated,
}

/// JSON header of a session container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionHeader {
    pub version: u32,
    pub config: RadarConfig,
    pub kind: PayloadKind,
    /// `[bursts, chirps, rx, samples]` for ADC payloads,
    /// `[time, rx, bins]` for decimated payloads.
    pub dims: Vec<usize>,
    /// CRC-32 of the payload bytes.
    pub payload_crc32: u32,
    /// Decimated payload timing (ADC timing derives from the config).
    pub sample_rate: f64,
    pub start_time: f64,
    pub range_bin_size: f64,
}

/// In-memory session: the sensor data of one recording.
#[derive(Debug, Clone)]
pub enum SessionPayload {
    Adc(AdcCube),
    Decimated(RangeProfileSeries),
}

impl SessionPayload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            SessionPayload::Adc(_) => PayloadKind::Adc,
            SessionPayload::Decimated(_) => PayloadKind::Decimated,
        }
    }
}

fn payload_to_f32(payload: &SessionPayload) -> Vec<f32> {
    match payload {
        SessionPayload::Adc(cube) => cube.raw_samples().iter().map(|&v| v as f32).collect(),
        SessionPayload::Decimated(series) => {
            let mut out = Vec::with_capacity(series.raw().len() * 2);
            for z in series.raw() {
                out.push(z.re as f32);
                out.push(z.im as f32);
            }
            out
        }
    }
}

/// Writes a session container.
pub fn write_session<P: AsRef<Path>>(
    path: P,
    config: &RadarConfig,
    payload: &SessionPayload,
) -> Result<(), SessionError> {
    let values = payload_to_f32(payload);
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in &values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let (dims, sample_rate, start_time, range_bin_size) = match payload {
        SessionPayload::Adc(cube) => (
            vec![
                cube.bursts,
                cube.config.chirps_per_burst,
                cube.config.rx_count,
                cube.config.samples_per_chirp,
            ],
            cube.config.burst_rate,
            0.0,
            0.0,
        ),
        SessionPayload::Decimated(series) => (
            vec![series.len, series.rx_count, series.bins],
            series.sample_rate,
            series.start_time,
            series.range_bin_size,
        ),
    };
    let header = SessionHeader {
        version: SESSION_VERSION,
        config: config.clone(),
        kind: payload.kind(),
        dims,
        payload_crc32: crc32(&bytes),
        sample_rate,
        start_time,
        range_bin_size,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| SessionError::Header(e.to_string()))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(SESSION_MAGIC)?;
    f.write_all(&(header_json.len() as u32).to_le_bytes())?;
    f.write_all(&header_json)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

/// Reads a session container, verifying magic, dimensions and checksum.
pub fn read_session<P: AsRef<Path>>(
    path: P,
) -> Result<(SessionHeader, SessionPayload), SessionError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != SESSION_MAGIC {
        return Err(SessionError::BadMagic);
    }
    let mut len4 = [0u8; 4];
    f.read_exact(&mut len4)?;
    let hlen = u32::from_le_bytes(len4) as usize;
    let mut header_json = vec![0u8; hlen];
    f.read_exact(&mut header_json)?;
    let header: SessionHeader =
        serde_json::from_slice(&header_json).map_err(|e| SessionError::Header(e.to_string()))?;

    let n_values: usize = match header.kind {
        PayloadKind::Adc => header.dims.iter().product(),
        PayloadKind::Decimated => header.dims.iter().product::<usize>() * 2,
    };
    let expected_bytes = n_values * 4;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != expected_bytes {
        if header.dims.iter().product::<usize>() == 0
            || bytes.len() % 4 != 0
            || bytes.len() < expected_bytes
        {
            return Err(SessionError::Truncated {
                expected: expected_bytes,
                got: bytes.len(),
            });
        }
        return Err(SessionError::DimensionMismatch);
    }
    if crc32(&bytes) != header.payload_crc32 {
        return Err(SessionError::ChecksumMismatch);
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let payload = match header.kind {
        PayloadKind::Adc => {
            if header.dims.len() != 4 {
                return Err(SessionError::Header("adc payload needs 4 dims".into()));
            }
            let cube = AdcCube::from_samples(
                header.config.clone(),
                header.dims[0],
                values.iter().map(|&v| v as f64).collect(),
            )?;
            SessionPayload::Adc(cube)
        }
        PayloadKind::Decimated => {
            if header.dims.len() != 3 {
                return Err(SessionError::Header("decimated payload needs 3 dims".into()));
            }
            let (len, rx, bins) = (header.dims[0], header.dims[1], header.dims[2]);
            let mut series = RangeProfileSeries::zeroed(
                len,
                rx,
                bins,
                header.sample_rate,
                header.range_bin_size,
                header.start_time,
            );
            for (slot, pair) in series.raw_mut().iter_mut().zip(values.chunks_exact(2)) {
                *slot = DspComplex::new(pair[0] as f64, pair[1] as f64);
            }
            SessionPayload::Decimated(series)
        }
    };
    Ok((header, payload))
}

/// Sidecar ground-truth labels for a simulated session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelFile {
    pub version: u32,
    pub scene: SceneSpec,
    pub profile: Profile,
    pub window_s: f64,
    pub step_s: f64,
    pub windows: Vec<WindowTruth>,
}

/// Label path next to a session: `<name>.labels.json`.
pub fn labels_path(session: &Path) -> PathBuf {
    let stem = session
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".to_string());
    session.with_file_name(format!("{stem}.labels.json"))
}

pub fn write_labels<P: AsRef<Path>>(path: P, labels: &LabelFile) -> Result<(), SessionError> {
    let json = serde_json::to_vec_pretty(labels).map_err(|e| SessionError::Header(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_labels<P: AsRef<Path>>(path: P) -> Result<LabelFile, SessionError> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| SessionError::Header(e.to_string()))
}

/// Thresholds and profile of one processing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub profile: Profile,
    pub theta_conf: f64,
    pub theta_still: f64,
    pub theta_par: f64,
    pub cfar_pfa: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        RunConfig {
            profile,
            theta_conf: crate::track::DEFAULT_THETA_CONF,
            theta_still: 10.0,
            theta_par: crate::baseline::DEFAULT_THETA_PAR,
            cfar_pfa: 1e-3,
            seed: 0,
        }
    }

    pub fn presence(&self) -> crate::frontend::PresenceConfig {
        crate::frontend::PresenceConfig {
            pfa: self.cfar_pfa,
            theta_still: self.theta_still,
            ..Default::default()
        }
    }
}
