//! `MSFF` feature files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `MSFF`                           |
//! | 4      | 2    | version, u16 = 1                       |
//! | 6      | 1    | dtype, u8 (0 = f32, 1 = f64)           |
//! | 7      | 8    | rows, u64                              |
//! | 15     | 8    | cols, u64                              |
//! | 23     | 1    | labels present, u8 (0 or 1)            |
//! | 24     | …    | rows × cols values, row-major          |
//! | …      | …    | rows × u32 class ids, if present       |

use std::path::Path;

use crate::error::{MsfError, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"MSFF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(MsfError::Format(format!("unknown dtype code {other}"))),
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Encodes a matrix (and optional per-row labels) into the `MSFF` layout.
pub fn encode_features(m: &Matrix, labels: Option<&[u32]>, dtype: Dtype) -> Result<Vec<u8>> {
    m.ensure_finite("feature payload")?;
    if let Some(l) = labels {
        if l.len() != m.rows() {
            return Err(MsfError::Shape(format!(
                "{} labels for {} rows",
                l.len(),
                m.rows()
            )));
        }
    }
    let n = m.rows() * m.cols();
    let mut out = Vec::with_capacity(HEADER_LEN + n * dtype.width() + labels.map_or(0, |l| 4 * l.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype.code());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.push(labels.is_some() as u8);
    match dtype {
        Dtype::F32 => {
            for &v in m.as_slice() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(l) = labels {
        for &id in l {
            out.extend_from_slice(&id.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes one `MSFF` record from the front of `bytes`, returning it and the
/// number of bytes consumed.
pub fn decode_features_prefix(bytes: &[u8]) -> Result<((Matrix, Option<Vec<u32>>), usize)> {
    if bytes.len() < 4 {
        return Err(MsfError::Length(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(MsfError::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if bytes.len() < HEADER_LEN {
        return Err(MsfError::Length(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(MsfError::Format(format!("unsupported version {version}")));
    }
    let dtype = Dtype::from_code(bytes[6])?;
    let rows = u64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[15..23].try_into().expect("8 bytes"));
    let has_labels = match bytes[23] {
        0 => false,
        1 => true,
        other => return Err(MsfError::Format(format!("labels flag must be 0 or 1, got {other}"))),
    };

    let overflow = || MsfError::Length(format!("header claims {rows}x{cols}, which overflows"));
    let n = rows.checked_mul(cols).ok_or_else(overflow)?;
    let payload = n.checked_mul(dtype.width() as u64).ok_or_else(overflow)?;
    let label_bytes = if has_labels { rows.checked_mul(4).ok_or_else(overflow)? } else { 0 };
    let total = (HEADER_LEN as u64)
        .checked_add(payload)
        .and_then(|t| t.checked_add(label_bytes))
        .ok_or_else(overflow)?;
    if (bytes.len() as u64) < total {
        return Err(MsfError::Length(format!(
            "header claims {rows}x{cols} ({total} bytes) but only {} bytes are present",
            bytes.len()
        )));
    }
    let (rows, cols, n, total) = (rows as usize, cols as usize, n as usize, total as usize);

    let body = &bytes[HEADER_LEN..];
    let data: Vec<f64> = match dtype {
        Dtype::F32 => body[..n * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => body[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    let m = Matrix::from_vec(rows, cols, data)?;
    m.ensure_finite("feature payload")?;
    let labels = has_labels.then(|| {
        body[n * dtype.width()..n * dtype.width() + rows * 4]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    });
    Ok(((m, labels), total))
}

/// Decodes a buffer that must hold exactly one record.
pub fn decode_features(bytes: &[u8]) -> Result<(Matrix, Option<Vec<u32>>)> {
    let (out, used) = decode_features_prefix(bytes)?;
    if used != bytes.len() {
        return Err(MsfError::Format(format!(
            "{} trailing bytes after feature payload",
            bytes.len() - used
        )));
    }
    Ok(out)
}

pub fn write_features(path: impl AsRef<Path>, m: &Matrix, labels: Option<&[u32]>, dtype: Dtype) -> Result<()> {
    let bytes = encode_features(m, labels, dtype)?;
    super::atomic_write(path.as_ref(), &bytes)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(Matrix, Option<Vec<u32>>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| MsfError::io(path, e))?;
    decode_features(&bytes)
}
