//! Raw IQ files: little-endian interleaved `f64` I/Q pairs with no header,
//! plus a `<file>.meta.json` sidecar.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const SAMPLE_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqMeta {
    pub sample_rate_hz: f64,
    pub fft_size: usize,
    pub symbol_count: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("malformed IQ data at byte {offset}: {message}")]
pub struct IqError {
    pub offset: usize,
    pub message: String,
}

pub fn meta_path(iq: &Path) -> PathBuf {
    let mut name = iq.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Decodes whole symbols of `symbol_len` samples.
pub fn parse_iq(bytes: &[u8], symbol_len: usize) -> Result<Vec<Complex64>, IqError> {
    if bytes.is_empty() {
        return Err(IqError {
            offset: 0,
            message: "file is empty".into(),
        });
    }
    let whole = bytes.len() / SAMPLE_BYTES * SAMPLE_BYTES;
    if whole != bytes.len() {
        return Err(IqError {
            offset: whole,
            message: format!("{} trailing bytes do not form an I/Q pair", bytes.len() - whole),
        });
    }
    let count = bytes.len() / SAMPLE_BYTES;
    if count % symbol_len != 0 {
        return Err(IqError {
            offset: count / symbol_len * symbol_len * SAMPLE_BYTES,
            message: format!("{count} samples are not a whole number of {symbol_len}-sample symbols"),
        });
    }
    bytes
        .chunks_exact(SAMPLE_BYTES)
        .enumerate()
        .map(|(i, c)| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            if re.is_finite() && im.is_finite() {
                Ok(Complex64::new(re, im))
            } else {
                Err(IqError {
                    offset: i * SAMPLE_BYTES,
                    message: "non-finite sample".into(),
                })
            }
        })
        .collect()
}

pub fn encode_iq(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * SAMPLE_BYTES);
    for s in samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}
