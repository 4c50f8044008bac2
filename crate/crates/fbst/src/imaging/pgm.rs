//! Binary PGM (P5) reader and writer.
//!
//! Reading accepts 8-bit and 16-bit (big-endian) payloads with `maxval` up to
//! 65535 and scales samples to `[0, 1]`. Writing clamps to `[0, 1]` and
//! quantizes to 8 bits, so `load(save(x))` is the identity on already
//! quantized data. Files are written atomically (temp file + rename).

use crate::error::{Error, Result};
use crate::imaging::Image;
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::Path;

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments that run to end of line.
    fn skip_separators(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn next_token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<u64> {
        let token = self.next_token()?;
        std::str::from_utf8(token)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| {
                Error::MalformedHeader(format!(
                    "{what} is not a decimal number: {:?}",
                    String::from_utf8_lossy(token)
                ))
            })
    }
}

/// Reads a binary PGM file and scales its samples to `[0, 1]`.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes)
}

/// Parses binary PGM bytes; see [`load_pgm`].
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file shorter than magic".into()));
    }
    if &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedMagic {
            found: String::from_utf8_lossy(&bytes[..2]).into_owned(),
        });
    }
    let mut parser = HeaderParser::new(&bytes[2..]);
    let width = parser.next_number("width")? as usize;
    let height = parser.next_number("height")? as usize;
    let maxval = parser.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!(
            "maxval {maxval} outside 1..=65535"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let mut pos = 2 + parser.pos;
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader(
            "missing whitespace before payload".into(),
        ));
    }
    pos += 1;

    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bytes_per_sample;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let maxval = maxval as f64;
    let mut data = Array2::<f64>::zeros((height, width));
    for i in 0..height {
        for j in 0..width {
            let idx = (i * width + j) * bytes_per_sample;
            let raw = if bytes_per_sample == 2 {
                u16::from_be_bytes([payload[idx], payload[idx + 1]]) as f64
            } else {
                payload[idx] as f64
            };
            // True division: keeps load(save(x)) exact on quantized data.
            data[[i, j]] = raw / maxval;
        }
    }
    Image::new(data)
}

/// Serializes an image as 8-bit binary PGM, clamping samples to `[0, 1]`.
pub fn pgm_bytes(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + image.num_pixels());
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height()).unwrap();
    for &v in image.samples() {
        let q = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.push(q);
    }
    out
}

/// Writes an image as 8-bit binary PGM via a temp file and rename.
pub fn save_pgm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    crate::report::write_atomic(path.as_ref(), &pgm_bytes(image))
}
