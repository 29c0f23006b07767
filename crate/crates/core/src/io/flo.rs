//! Middlebury `.flo` optical flow container.
//!
//! Layout (little endian): `f32` magic 202021.25 (bytes `PIEH`), `i32` width,
//! `i32` height, then `width * height` interleaved `(u, v)` `f32` pairs, row-major.

use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::raster::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;
/// Refuse headers describing more than 2^28 pixels.
const MAX_PIXELS: usize = 1 << 28;

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    decode_flo(&read_bytes(path)?).map_err(|msg| Error::format(path, msg))
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_flo(flow))
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + flow.data().len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for d in flow.data() {
        out.extend_from_slice(&d[0].to_le_bytes());
        out.extend_from_slice(&d[1].to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> std::result::Result<FlowField, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header: {} bytes", bytes.len()));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(format!("bad magic {magic} (expected {FLO_MAGIC})"));
    }
    let w = i32::from_le_bytes(word(4));
    let h = i32::from_le_bytes(word(8));
    if w <= 0 || h <= 0 {
        return Err(format!("invalid dimensions {w}x{h}"));
    }
    let (w, h) = (w as usize, h as usize);
    let pixels = w
        .checked_mul(h)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| format!("dimensions {w}x{h} overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != pixels * 8 {
        return Err(format!(
            "payload is {} bytes, expected {} for {w}x{h}",
            payload.len(),
            pixels * 8
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    FlowField::new(w, h, data).map_err(|e| e.to_string())
}
