//! Binary matrix files and CSV export.
//!
//! Layout (little-endian): magic `PTROMMAT`, `u32` version, `u64` rows,
//! `u64` cols, `f64` dt, `f64` t0, then `rows·cols` column-major `f64`s.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrators::SnapshotMatrix;

const MAGIC: &[u8; 8] = b"PTROMMAT";
const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 8 + 8 + 8;

/// Time metadata stored alongside a matrix; zero for non-temporal data such as bases.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatrixHeader {
    pub dt: f64,
    pub t0: f64,
}

pub fn encode_matrix(m: &DMatrix<f64>, header: MatrixHeader) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER + 8 * m.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    buf.extend_from_slice(&header.dt.to_le_bytes());
    buf.extend_from_slice(&header.t0.to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<(DMatrix<f64>, MatrixHeader)> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad("missing matrix header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(8) != VERSION {
        return Err(bad("unsupported version"));
    }
    let rows = u64_at(12) as usize;
    let cols = u64_at(20) as usize;
    let header = MatrixHeader {
        dt: f64_at(28),
        t0: f64_at(36),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| bad("shape overflow"))?;
    if bytes.len() != HEADER + 8 * count {
        return Err(bad("payload length does not match shape"));
    }
    let data = (0..count).map(|k| f64_at(HEADER + 8 * k)).collect();
    Ok((DMatrix::from_vec(rows, cols, data), header))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, header: MatrixHeader) -> Result<()> {
    fs::write(path, encode_matrix(m, header)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, MatrixHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

pub fn write_snapshots(path: &Path, s: &SnapshotMatrix) -> Result<()> {
    write_matrix(path, &s.to_matrix(), MatrixHeader { dt: s.dt, t0: s.t0 })
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    let (m, h) = read_matrix(path)?;
    SnapshotMatrix::from_columns(m.nrows(), h.dt, h.t0, m.as_slice().to_vec())
}

/// One CSV row per column of `m` (each row lists that column's entries).
pub fn columns_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for col in m.column_iter() {
        let line: Vec<String> = col.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    s
}

/// Writes `contents` creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
