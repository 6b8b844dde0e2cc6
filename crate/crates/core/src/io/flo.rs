//! Middlebury `.flo`: little-endian `f32` magic 202021.25, `i32` width and
//! height, then row-major interleaved `(u, v)` `f32` pairs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::format(
            bytes.len(),
            format!("truncated header: expected 12 bytes, found {}", bytes.len()),
        ));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic}, expected {FLO_MAGIC}")));
    }
    let w = i32::from_le_bytes(word(4));
    let h = i32::from_le_bytes(word(8));
    if w <= 0 || h <= 0 {
        return Err(Error::format(4, format!("invalid dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 8 * w * h;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected),
            format!("size mismatch: header implies {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let data = (0..2 * w * h).map(|i| f32::from_le_bytes(word(12 + 4 * i)) as f64).collect();
    FlowField::new(w, h, data)
}

/// Encodes as `f32`; values not representable in `f32` are rounded.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * flow.data().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for &v in flow.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    decode_flo(&std::fs::read(path)?)
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    super::write_atomic(path, &encode_flo(flow))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vector_byte_layout() {
        let f = FlowField::new(1, 1, vec![1.5, -2.0]).unwrap();
        let bytes = encode_flo(&f);
        let want: [u8; 20] = [
            0x50, 0x49, 0x45, 0x48, // 202021.25 = "PIEH"
            1, 0, 0, 0, 1, 0, 0, 0, // width, height
            0x00, 0x00, 0xc0, 0x3f, // 1.5
            0x00, 0x00, 0x00, 0xc0, // -2.0
        ];
        assert_eq!(bytes, want);
        assert_eq!(decode_flo(&want).unwrap(), f);
    }

    #[test]
    fn bad_files() {
        let mut bytes = encode_flo(&FlowField::zeros(2, 2));
        bytes.truncate(30);
        let e = decode_flo(&bytes).unwrap_err().to_string();
        assert!(e.contains("44") && e.contains("30"), "{e}");
        bytes[0] = 0;
        assert!(decode_flo(&bytes).unwrap_err().to_string().contains("magic"));
    }
}
