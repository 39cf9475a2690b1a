//! Binary PGM (P5) image I/O, 8-bit and 16-bit.
//!
//! Intensities are mapped to floating values in [0, 255] on load regardless
//! of bit depth, and clamped back on save.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{PdError, PdResult};
use crate::grid::{FieldKind, GridField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

fn parse_header(bytes: &[u8]) -> PdResult<(usize, usize, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PdError::Format("not a binary PGM (missing P5 magic)".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and '#' comment lines between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(PdError::Format("truncated PGM header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| PdError::Format("non-ascii PGM header".into()))?;
        *field = text.parse().map_err(|_| PdError::Format("bad PGM header value".into()))?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PdError::Format("missing separator after PGM maxval".into()));
    }
    pos += 1;
    let (width, height, maxval) = (fields[0], fields[1], fields[2] as u32);
    if maxval == 0 || maxval > 65535 {
        return Err(PdError::Format(format!("unsupported PGM maxval {maxval}")));
    }
    Ok((height, width, maxval, pos))
}

/// Reads a binary PGM into a scalar field with intensities in [0, 255].
pub fn read_pgm(path: impl AsRef<Path>) -> PdResult<GridField> {
    let bytes = fs::read(path)?;
    let (rows, cols, maxval, offset) = parse_header(&bytes)?;
    let raster = &bytes[offset..];
    let mut data = Vec::with_capacity(rows * cols);
    if maxval < 256 {
        if raster.len() < rows * cols {
            return Err(PdError::Format("truncated PGM raster".into()));
        }
        let scale = 255.0 / maxval as f64;
        for &b in &raster[..rows * cols] {
            data.push(b as f64 * scale);
        }
    } else {
        if raster.len() < 2 * rows * cols {
            return Err(PdError::Format("truncated 16-bit PGM raster".into()));
        }
        let scale = 255.0 / maxval as f64;
        for pair in raster[..2 * rows * cols].chunks_exact(2) {
            let v = u16::from_be_bytes([pair[0], pair[1]]);
            data.push(v as f64 * scale);
        }
    }
    GridField::from_real(rows, cols, FieldKind::Scalar, data)
}

/// Writes a scalar field as binary PGM, clamping intensities to [0, 255].
pub fn write_pgm(path: impl AsRef<Path>, field: &GridField, depth: PgmDepth) -> PdResult<()> {
    if field.kind() != FieldKind::Scalar {
        return Err(PdError::Invalid("only scalar fields can be written as PGM".into()));
    }
    let (rows, cols) = (field.rows(), field.cols());
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    let mut out = Vec::with_capacity(32 + field.pixels() * 2);
    write!(&mut out, "P5\n{cols} {rows}\n{maxval}\n")?;
    let scale = maxval as f64 / 255.0;
    for &v in field.real() {
        let q = (v.clamp(0.0, 255.0) * scale).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q.min(255) as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q.min(65535) as u16).to_be_bytes()),
        }
    }
    fs::write(path, out)?;
    Ok(())
}
