//! Raw little-endian `f64` array files with a shape record kept in a JSON
//! manifest next to them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayRecord {
    pub file: String,
    /// Byte offset of the first element.
    pub offset: u64,
    pub shape: Vec<usize>,
}

impl ArrayRecord {
    pub fn new(file: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            file: file.into(),
            offset: 0,
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Parse(format!(
            "blob length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write(dir: &Path, record: &ArrayRecord, values: &[f64]) -> Result<()> {
    if values.len() != record.len() {
        return Err(Error::Dimension(format!(
            "{}: {} values for shape {:?}",
            record.file,
            values.len(),
            record.shape
        )));
    }
    let path = dir.join(&record.file);
    fs::write(&path, encode(values)).map_err(|e| Error::io(&path, e))
}

pub fn read(dir: &Path, record: &ArrayRecord) -> Result<Vec<f64>> {
    let path = dir.join(&record.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let start = record.offset as usize;
    let end = start + record.len() * 8;
    if bytes.len() < end {
        return Err(Error::Parse(format!(
            "{}: file holds {} bytes, shape {:?} at offset {start} needs {end}",
            record.file,
            bytes.len(),
            record.shape
        )));
    }
    decode(&bytes[start..end])
}
