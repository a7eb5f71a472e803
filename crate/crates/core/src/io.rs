//! Binary matrix/label files and JSON run configuration.
//!
//! Matrix file (`LGF1`), little-endian:
//!
//! | offset | size          | field                         |
//! |--------|---------------|-------------------------------|
//! | 0      | 4             | magic `b"LGF1"`               |
//! | 4      | 4             | rows (`u32`)                  |
//! | 8      | 4             | cols (`u32`)                  |
//! | 12     | rows*cols*4   | `f32` payload, row-major      |
//!
//! Label file (`LGL1`): magic, `n: u32`, `k: u32`, then `n` `u32` labels with
//! `0xFFFF_FFFF` meaning IGNORE.
//!
//! No trailing bytes are allowed in either format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{Label, LabelVector};
use crate::matrix::Matrix;
use crate::synth::ScenarioConfig;
use crate::trainer::{PretrainConfig, TrainConfig};

pub const MATRIX_MAGIC: &[u8; 4] = b"LGF1";
pub const LABEL_MAGIC: &[u8; 4] = b"LGL1";
pub const HEADER_LEN: usize = 12;
pub const IGNORE_CODE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },

    #[error("dimensions {rows}x{cols} overflow the format")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("label {value} at index {index} is not below k = {k}")]
    ValueExceedsK { index: usize, value: u32, k: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>, FormatError> {
    let overflow = || FormatError::DimensionOverflow { rows: m.rows() as u64, cols: m.cols() as u64 };
    let rows = u32::try_from(m.rows()).map_err(|_| overflow())?;
    let cols = u32::try_from(m.cols()).map_err(|_| overflow())?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &v in m.as_slice() {
        // `as` rounds to nearest, ties to even
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix, FormatError> {
    let (rows, cols) = read_header(bytes, MATRIX_MAGIC)?;
    let count = payload_count(rows, cols)?;
    let payload = check_payload(bytes, count)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Matrix::new(rows as usize, cols as usize, data).expect("payload length checked"))
}

pub fn encode_labels(labels: &LabelVector) -> Result<Vec<u8>, FormatError> {
    let overflow = || FormatError::DimensionOverflow { rows: labels.len() as u64, cols: labels.k() as u64 };
    let n = u32::try_from(labels.len()).map_err(|_| overflow())?;
    let k = u32::try_from(labels.k()).ok().filter(|&k| k < IGNORE_CODE).ok_or_else(overflow)?;
    let mut out = Vec::with_capacity(HEADER_LEN + labels.len() * 4);
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    for l in labels.iter() {
        let code = match l {
            Label::Class(c) => c,
            Label::Ignore => IGNORE_CODE,
        };
        out.extend_from_slice(&code.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelVector, FormatError> {
    let (n, k) = read_header(bytes, LABEL_MAGIC)?;
    let payload = check_payload(bytes, n as usize)?;
    let mut labels = Vec::with_capacity(n as usize);
    for (index, c) in payload.chunks_exact(4).enumerate() {
        let value = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        labels.push(match value {
            IGNORE_CODE => Label::Ignore,
            v if v < k => Label::Class(v),
            v => return Err(FormatError::ValueExceedsK { index, value: v, k }),
        });
    }
    Ok(LabelVector::new(labels, k as usize).expect("labels checked against k"))
}

fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(u32, u32), FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
    }
    let found: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if &found != magic {
        return Err(FormatError::BadMagic { expected: *magic, found });
    }
    let a = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let b = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    Ok((a, b))
}

fn payload_count(rows: u32, cols: u32) -> Result<usize, FormatError> {
    (rows as u64)
        .checked_mul(cols as u64)
        .filter(|&c| c.checked_mul(4).is_some_and(|b| b <= isize::MAX as u64))
        .map(|c| c as usize)
        .ok_or(FormatError::DimensionOverflow { rows: rows as u64, cols: cols as u64 })
}

fn check_payload(bytes: &[u8], count: usize) -> Result<&[u8], FormatError> {
    let expected = count * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(FormatError::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes { extra: payload.len() - expected });
    }
    Ok(payload)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix, FormatError> {
    decode_matrix(&fs::read(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_matrix(m)?)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVector, FormatError> {
    decode_labels(&fs::read(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_labels(labels)?)?)
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub pretrain: PretrainConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T, FormatError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::PseudoLabelMode;
    use crate::synth::PriorShift;
    use proptest::prelude::*;

    #[test]
    fn dyadic_value_roundtrips() {
        let m = Matrix::from_rows(&[[1.5]]).unwrap();
        let bytes = encode_matrix(&m).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(decode_matrix(&bytes).unwrap(), m);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_matrix(&Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_matrix(&bytes), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MATRIX_MAGIC);
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 20]);
        assert!(matches!(
            decode_matrix(&bytes),
            Err(FormatError::TruncatedPayload { expected: 24, found: 20 })
        ));
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(decode_matrix(&bytes), Err(FormatError::TrailingBytes { extra: 4 })));
        assert!(matches!(decode_matrix(b"LGF1"), Err(FormatError::TruncatedPayload { .. })));
    }

    #[test]
    fn huge_dimensions_overflow() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MATRIX_MAGIC);
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_matrix(&bytes), Err(FormatError::DimensionOverflow { .. })));
    }

    #[test]
    fn header_layout_is_fixed() {
        let m = Matrix::from_rows(&[[1.0, -2.0], [0.25, 3.0]]).unwrap();
        let bytes = encode_matrix(&m).unwrap();
        assert_eq!(&bytes[..12], b"LGF1\x02\x00\x00\x00\x02\x00\x00\x00");
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn labels_with_ignore_roundtrip() {
        let y = LabelVector::new(vec![Label::Class(0), Label::Ignore, Label::Class(2)], 3).unwrap();
        let bytes = encode_labels(&y).unwrap();
        assert_eq!(&bytes[16..20], &[0xFF; 4]);
        assert_eq!(decode_labels(&bytes).unwrap(), y);
    }

    #[test]
    fn label_exceeding_k() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(LABEL_MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&5u32.to_le_bytes());
        assert!(matches!(decode_labels(&bytes), Err(FormatError::ValueExceedsK { index: 0, value: 5, k: 3 })));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lgf");
        let m = Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(*b, *a as f32 as f64);
        }
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let mut value = serde_json::to_value(RunConfig::default()).unwrap();
        value["train"]["bogus"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&value.to_string()).is_err());
        let mut value = serde_json::to_value(RunConfig::default()).unwrap();
        value["extra"] = serde_json::json!(true);
        assert!(RunConfig::from_json(&value.to_string()).is_err());
    }

    proptest! {
        #[test]
        fn f32_values_roundtrip_exactly(vals in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 1..64)) {
            let m = Matrix::new(1, vals.len(), vals.iter().map(|&v| v as f64).collect()).unwrap();
            prop_assert_eq!(decode_matrix(&encode_matrix(&m).unwrap()).unwrap(), m);
        }

        #[test]
        fn label_files_roundtrip(codes in prop::collection::vec(prop::option::of(0u32..7), 0..100)) {
            let labels = codes.iter().map(|c| c.map_or(Label::Ignore, Label::Class)).collect();
            let y = LabelVector::new(labels, 7).unwrap();
            prop_assert_eq!(decode_labels(&encode_labels(&y).unwrap()).unwrap(), y);
        }

        #[test]
        fn run_config_roundtrips(
            seed in any::<u64>(),
            rho in 0.01f64..1.0,
            lambda in 1e-3f64..1.0,
            views in 1usize..8,
            decay in 0.1f64..1.0,
            mode_idx in 0usize..3,
        ) {
            let mut cfg = RunConfig::default();
            cfg.scenario.seed = seed.into();
            cfg.scenario.prior_shift = PriorShift::Decay(decay);
            cfg.train.anchor.rho = rho;
            cfg.train.sinkhorn.lambda = lambda;
            cfg.train.ensemble.views = views;
            cfg.train.mode = PseudoLabelMode::ALL[mode_idx];
            let parsed = RunConfig::from_json(&cfg.to_json()).unwrap();
            prop_assert_eq!(&parsed, &cfg);
            prop_assert_eq!(RunConfig::from_json(&parsed.to_json()).unwrap(), parsed);
        }
    }
}
