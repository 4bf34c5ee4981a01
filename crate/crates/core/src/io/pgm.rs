//! Binary (P5) portable graymap reader and writer; the only frame codec.
//! Only maxval 255 is supported.

use std::path::Path;

use crate::error::{Error, Result};
use crate::localization::GrayFrame;

/// Decode a P5 graymap. Header comments (`#`) are honored.
pub fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<GrayFrame> {
    let bad = |reason: &str| Error::parse(path, 1, reason.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("not a binary graymap (missing P5 magic)"));
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comment lines.
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
            return Err(bad("malformed header: expected a decimal field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf-8");
        *field = text
            .parse::<usize>()
            .map_err(|_| bad("malformed header: field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Validation(format!(
            "unsupported graymap maxval {maxval} in {}: only 255 is handled",
            path.display()
        )));
    }
    if width == 0 || height == 0 {
        return Err(bad("zero frame dimension"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("malformed header: missing payload separator"));
    }
    pos += 1;
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(bad(&format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    GrayFrame::from_data(width, height, payload[..expected].to_vec())
}

/// Encode a frame as a P5 graymap.
pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.data());
    out
}

/// Read one frame from disk.
pub fn read_frame(path: &Path) -> Result<GrayFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(path, &bytes)
}

/// Write one frame to disk (atomically via a temp file).
pub fn write_frame(path: &Path, frame: &GrayFrame) -> Result<()> {
    super::write_atomic(path, &encode_pgm(frame))
}
