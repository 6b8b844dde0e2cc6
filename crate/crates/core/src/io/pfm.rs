//! Grayscale portable float map (`Pf`). The header is `Pf`, `width height`
//! and a scale whose sign gives the byte order (negative: little-endian).
//! Rows are stored bottom-to-top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::DepthMap;

fn header_line(bytes: &[u8], pos: &mut usize) -> Result<String> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(Error::format(start, "unterminated header line"));
    }
    let line = std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::format(start, "header is not ASCII"))?;
    *pos += 1;
    Ok(line.trim().to_string())
}

/// Parses a `Pf` file into a depth map. NaN or infinite samples are a
/// validation error; with `strict`, so is any non-positive depth. Indices
/// in errors are row-major from the top-left pixel.
pub fn decode_pfm(bytes: &[u8], strict: bool) -> Result<DepthMap> {
    let mut pos = 0;
    let magic = header_line(bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(Error::format(0, format!("unsupported magic {magic:?}, expected \"Pf\"")));
    }
    let dims_at = pos;
    let dims = header_line(bytes, &mut pos)?;
    let parsed: Vec<usize> = dims.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [w, h] = parsed[..] else {
        return Err(Error::format(dims_at, format!("bad dimension line {dims:?}")));
    };
    if w == 0 || h == 0 || dims.split_whitespace().count() != 2 {
        return Err(Error::format(dims_at, format!("bad dimension line {dims:?}")));
    }
    let scale_at = pos;
    let scale: f64 = header_line(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::format(scale_at, "scale is not a number"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(scale_at, "scale must be non-zero"));
    }
    let little = scale < 0.0;
    let need = 4 * w * h;
    if bytes.len() - pos != need {
        return Err(Error::format(
            bytes.len(),
            format!("payload size mismatch: expected {need} bytes, found {}", bytes.len() - pos),
        ));
    }
    let mut data = vec![0.0; w * h];
    for row in 0..h {
        // file row `row` is image row `h - 1 - row`
        for x in 0..w {
            let o = pos + 4 * (row * w + x);
            let b = [bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]];
            let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            data[(h - 1 - row) * w + x] = v as f64;
        }
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation { index: i, message: format!("non-finite depth {}", data[i]) });
    }
    if strict {
        if let Some(i) = data.iter().position(|v| *v <= 0.0) {
            return Err(Error::Validation { index: i, message: format!("non-positive depth {}", data[i]) });
        }
    }
    DepthMap::new(w, h, data)
}

/// Encodes little-endian `f32` samples, bottom row first.
pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for row in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(depth.get(x, row) as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_depth(path: &Path, strict: bool) -> Result<DepthMap> {
    decode_pfm(&std::fs::read(path)?, strict)
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    super::write_atomic(path, &encode_pfm(depth))
}
