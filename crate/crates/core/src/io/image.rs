//! 8-bit PNG (gray or RGB) and binary PGM/PPM (maxval 255).
//!
//! Reading maps byte `n` to `n / 255`; writing rounds `255 * v` to nearest,
//! ties to even.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ColorType, ExtendedColorType, ImageEncoder};

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Png,
    Pnm,
}

fn container_for(path: &Path) -> Result<Container> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => Ok(Container::Png),
        Some("pgm") | Some("ppm") | Some("pnm") => Ok(Container::Pnm),
        _ => Err(Error::format(
            path,
            "unsupported image extension (expected .png, .pgm or .ppm)",
        )),
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub fn dequantize(n: u8) -> f32 {
    n as f32 / 255.0
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    decode_image(&bytes).map_err(|msg| Error::format(path, msg))
}

pub fn write_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, container_for(path)? == Container::Png)
        .map_err(|msg| Error::format(path, msg))?;
    write_bytes(path, &bytes)
}

pub fn decode_image(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err("unrecognised image format (expected PNG or binary PGM/PPM)".into())
    }
}

/// Encodes as PNG (`png = true`) or PGM/PPM by channel count.
pub fn encode_image(img: &ImageBuffer, png: bool) -> std::result::Result<Vec<u8>, String> {
    let raw: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    if png {
        let color = match img.channels() {
            1 => ExtendedColorType::L8,
            _ => ExtendedColorType::Rgb8,
        };
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(&raw, img.width() as u32, img.height() as u32, color)
            .map_err(|e| e.to_string())?;
        Ok(out)
    } else {
        let magic = if img.channels() == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        out.extend_from_slice(&raw);
        Ok(out)
    }
}

fn decode_png(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    let dynimg =
        image::load(Cursor::new(bytes), image::ImageFormat::Png).map_err(|e| e.to_string())?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let (channels, raw) = match dynimg.color() {
        ColorType::L8 => (1, dynimg.into_bytes()),
        ColorType::Rgb8 => (3, dynimg.into_bytes()),
        other => {
            return Err(format!(
                "unsupported PNG color type {other:?} (expected 8-bit gray or RGB)"
            ))
        }
    };
    ImageBuffer::new(w, h, channels, raw.into_iter().map(dequantize).collect())
        .map_err(|e| e.to_string())
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    let channels = if &bytes[..2] == b"P5" { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PNM header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "PNM header value too large".to_string())?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("malformed PNM header".into()),
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported PNM maxval {maxval} (expected 255)"));
    }
    if w == 0 || h == 0 {
        return Err(format!("empty PNM image {w}x{h}"));
    }
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(channels))
        .ok_or("PNM dimensions overflow")?;
    let raster = &bytes[pos..];
    if raster.len() < n {
        return Err(format!(
            "truncated PNM raster: {} of {n} bytes",
            raster.len()
        ));
    }
    ImageBuffer::new(
        w,
        h,
        channels,
        raster[..n].iter().map(|&b| dequantize(b)).collect(),
    )
    .map_err(|e| e.to_string())
}
