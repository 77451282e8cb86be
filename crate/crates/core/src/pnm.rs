//! Minimal binary netpbm support: P5 (8- and 16-bit) in, P5 and P6 out.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Decoded P5 image. Samples are widened to `u16`; 16-bit data is big-endian
/// on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: u32,
    pub height: u32,
    pub maxval: u32,
    pub samples: Vec<u16>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedPnm(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::MalformedPnm(format!("{what} out of range")))
    }
}

/// Parses a binary graymap. `maxval` may be anything in `1..=65535`; callers
/// enforce the depth they need.
pub fn decode_pgm(bytes: &[u8]) -> Result<Graymap> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::MalformedPnm("expected P5 magic".into()));
    }
    let mut header = HeaderReader { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedPnm(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(Error::MalformedPnm("missing whitespace after maxval".into())),
    }

    let count = width as usize * height as usize;
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let payload = &bytes[header.pos..];
    let expected = count * bytes_per_sample;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let samples = if bytes_per_sample == 1 {
        payload[..count].iter().map(|&b| b as u16).collect()
    } else {
        payload[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Graymap {
        width,
        height,
        maxval,
        samples,
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Graymap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn encode_pgm8(width: u32, height: u32, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn encode_pgm16(width: u32, height: u32, samples: &[u16]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Encodes an 8-bit RGB image (`rgb.len() == 3·width·height`) as P6.
pub fn encode_ppm(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    debug_assert_eq!(rgb.len(), 3 * width as usize * height as usize);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
