//! FMX: a small self-describing binary container for dense `f64` matrices.
//!
//! Layout (little-endian): magic `FMX1`, dtype `u8` (0 = float64), ndim `u8`
//! (always 2), rows `u64`, cols `u64`, then `rows * cols` values row-major.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FMX1";
pub const DTYPE_F64: u8 = 0;
const HEADER_LEN: usize = 4 + 1 + 1 + 8 + 8;

pub fn encode(matrix: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = matrix.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * rows * cols);
    buf.extend_from_slice(MAGIC);
    buf.push(DTYPE_F64);
    buf.push(2);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    buf
}

/// Decode an FMX byte buffer. `origin` is only used for error messages.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<DMatrix<f64>> {
    let fail = |detail: String| Error::Format {
        path: origin.to_path_buf(),
        detail,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(fail(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != DTYPE_F64 {
        return Err(fail(format!("unsupported dtype code {}", bytes[4])));
    }
    if bytes[5] != 2 {
        return Err(fail(format!("unsupported ndim {}", bytes[5])));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(6), word(14));
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| fail(format!("dimension overflow ({rows} x {cols})")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < payload {
        return Err(fail(format!(
            "truncated payload: expected {payload} bytes, found {}",
            body.len()
        )));
    }
    if body.len() > payload {
        return Err(fail(format!(
            "{} trailing bytes after payload",
            body.len() - payload
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let value = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(DMatrix::from_fn(rows, cols, |i, j| value(i * cols + j)))
}

pub fn write<W: Write>(mut writer: W, matrix: &DMatrix<f64>) -> std::io::Result<()> {
    writer.write_all(&encode(matrix))
}

pub fn read<R: Read>(mut reader: R, origin: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(origin, e))?;
    decode(&bytes, origin)
}

/// Write `matrix` to `path`. Entries must be finite.
pub fn save_matrix(path: impl AsRef<Path>, matrix: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    if let Some((k, v)) = matrix.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "refusing to save non-finite entry {v} at flat index {k} to {}",
            path.display()
        )));
    }
    std::fs::write(path, encode(matrix)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
