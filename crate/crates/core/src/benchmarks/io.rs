//! Binary matrix files: an 8-byte magic, row and column counts as
//! little-endian `u64`, then the row-major `f64` data in little-endian order.
//! Metadata travels in a JSON sidecar next to the matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{de::DeserializeOwned, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MIBMAT01";

pub fn write_matrix(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_owned(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 24];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let n = rows.checked_mul(cols).ok_or_else(|| bad("dimensions overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(bad("payload length does not match dimensions"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
}

/// `data.bin` -> `data.json`.
pub fn sidecar_path(matrix_path: impl AsRef<Path>) -> PathBuf {
    matrix_path.as_ref().with_extension("json")
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let r = BufReader::new(File::open(path.as_ref())?);
    Ok(serde_json::from_reader(r)?)
}
