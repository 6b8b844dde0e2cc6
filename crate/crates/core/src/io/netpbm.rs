//! Binary portable gray/pix maps (`P5`, `P6`) with 8- or 16-bit samples.
//! 16-bit samples are big-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} is out of range")))
    }
}

/// Parses a `P5`/`P6` file; intensities are divided by maxval.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "file too short for a magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        m => return Err(Error::format(0, format!("unsupported magic {:?}", String::from_utf8_lossy(m)))),
    };
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(maxval_at, "image dimensions must be positive"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(Error::format(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err(Error::format(c.pos, "expected a single whitespace byte after maxval"));
    }
    let start = c.pos + 1;
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::format(2, "image dimensions overflow"))?;
    let need = n * bps;
    let have = bytes.len() - start;
    if have < need {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {need} bytes, found {have}"),
        ));
    }
    let payload = &bytes[start..start + need];
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let v = if bps == 1 {
            payload[i] as usize
        } else {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as usize
        };
        if v > maxval {
            return Err(Error::format(start + i * bps, format!("sample {v} exceeds maxval {maxval}")));
        }
        data.push(v as f64 / scale);
    }
    Image::new(width, height, channels, data)
}

/// Encodes with samples `round(v · maxval)`; `P5` for gray, `P6` for color.
pub fn encode_pnm(img: &Image, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidInput("maxval must be positive".into()));
    }
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    let m = maxval as f64;
    for &v in img.data() {
        let q = (v * m).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_image(path: &Path) -> Result<Image> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_image(path: &Path, img: &Image, maxval: u16) -> Result<()> {
    super::write_atomic(path, &encode_pnm(img, maxval)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_assembled_gray_file() {
        let img = decode_pnm(b"P5\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 1, 1));
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn comments_and_sixteen_bit() {
        let img = decode_pnm(b"P5 # comment\n1 # w\n1\n65535\n\x80\x00").unwrap();
        assert_eq!(img.data(), &[32768.0 / 65535.0]);
        let back = encode_pnm(&img, 65535).unwrap();
        assert_eq!(&back[back.len() - 2..], &[0x80, 0x00]);
    }

    #[test]
    fn malformed_inputs_name_the_problem() {
        let e = decode_pnm(b"P9\n1 1\n255\n\x00").unwrap_err().to_string();
        assert!(e.contains("P9"), "{e}");
        match decode_pnm(b"P5\n2 2\n255\n\x00\x01") {
            Err(Error::Format { message, .. }) => assert!(message.contains("expected 4 bytes, found 2"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_pnm(b"P5\nx 2\n255\n"), Err(Error::Format { offset: 3, .. })));
        assert!(decode_pnm(b"P5\n1 1\n0\n\x00").is_err());
        assert!(decode_pnm(b"P5\n1 1\n10\n\x0b").is_err());
    }

    #[test]
    fn color_round_trip() {
        let img = Image::new(2, 1, 3, vec![0.0, 1.0, 128.0 / 255.0, 3.0 / 255.0, 1.0, 0.0]).unwrap();
        let bytes = encode_pnm(&img, 255).unwrap();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(decode_pnm(&bytes).unwrap(), img);
    }
}
