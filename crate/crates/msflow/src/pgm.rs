//! Binary PGM (P5) reading and writing.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use msflow_core::Frame;

use crate::error::IoError;

/// Parses a P5 image. Samples are scaled by `1 / maxval`; 16-bit samples
/// are big-endian.
pub fn decode(bytes: &[u8]) -> Result<Frame, IoError> {
    let mut pos = 0usize;
    let magic = token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(IoError::Parse("not a binary PGM (missing P5 magic)".into()));
    }
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::Parse(format!("bad dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::Parse(format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(IoError::Parse("missing whitespace after maxval".into())),
    }
    let wide = maxval > 255;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| IoError::Parse("dimensions overflow".into()))?;
    let need = if wide { 2 * n } else { n };
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(IoError::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("truncated payload: {} of {need} bytes", payload.len()),
        )));
    }
    let scale = 1.0 / maxval as f64;
    let data: Vec<f64> = if wide {
        payload[..need]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]).min(maxval as u16) as f64 * scale)
            .collect()
    } else {
        payload[..need]
            .iter()
            .map(|&b| (b as usize).min(maxval) as f64 * scale)
            .collect()
    };
    Frame::new(width, height, data).map_err(|e| IoError::Parse(e.to_string()))
}

/// Encodes with maxval 255, rounding half up after clamping to `[0, 1]`.
pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|&v| quantize(v)));
    out
}

/// `[0, 1]` to a byte, half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn load(path: &Path) -> Result<Frame, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::at(path, e))?;
    decode(&bytes).map_err(|e| e.in_file(path))
}

pub fn save(path: &Path, frame: &Frame) -> Result<(), IoError> {
    let mut f = fs::File::create(path).map_err(|e| IoError::at(path, e))?;
    f.write_all(&encode(frame))
        .map_err(|e| IoError::at(path, e))
}

fn skip_space(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], IoError> {
    skip_space(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(IoError::Parse("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, IoError> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::Parse(format!("bad {what} `{}`", String::from_utf8_lossy(t))))
}
