//! On-disk formats.
//!
//! Feature file (`.dmf`): the 4 bytes `DMF1`, then `T` and `D` as
//! little-endian `u32`, then `T * D` little-endian IEEE-754 `f32` values in
//! row-major order. Values are widened to `f64` on load.
//!
//! Annotation file (`.json`): one document per video with its id, frame
//! count, frame rate, class vocabulary and end-exclusive intervals given as
//! `(class name, start, end)`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"DMF1";

pub fn write_features(path: &Path, features: &Matrix) -> Result<()> {
    let too_big = |n: usize| u32::try_from(n).map_err(|_| Error::format(path, "dimension exceeds u32"));
    let rows = too_big(features.rows())?;
    let cols = too_big(features.cols())?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(FEATURE_MAGIC)?;
    write(&rows.to_le_bytes())?;
    write(&cols.to_le_bytes())?;
    for &v in features.data() {
        write(&(v as f32).to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(path, "missing DMF1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * cols * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes of data for {rows}x{cols}, found {}", rows * cols * 4, body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Matrix::new(rows, cols, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub video_id: String,
    pub frames: usize,
    pub frame_rate: f64,
    pub classes: Vec<String>,
    /// `(class name, start, end)`, end-exclusive.
    pub intervals: Vec<(String, usize, usize)>,
}

pub fn write_annotation(path: &Path, annotation: &Annotation) -> Result<()> {
    let mut text = serde_json::to_string_pretty(annotation).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_annotation(path: &Path) -> Result<Annotation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
