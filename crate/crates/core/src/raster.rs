//! Dense float rasters: images, flow fields and scalar maps.
//!
//! Pixel `(x, y)` is column `x`, row `y`, origin top-left. Row `y` is also
//! the scanline index. All storage is row-major `f32`.

use crate::error::{Error, Result};

/// An `H x W x C` raster with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Invalid(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("empty image {width}x{height}")));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::size("image data length", expected, data.len()));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::Invalid(format!(
                "image value {} at index {i} is not a finite value in [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from a per-sample function; results are clamped to `[0, 1]`
    /// and NaN maps to 0.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        assert!(
            channels == 1 || channels == 3,
            "channel count must be 1 or 3"
        );
        assert!(width > 0 && height > 0, "empty image");
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(x, y, c)));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self::from_fn(width, height, channels, |_, _, _| value)
    }

    /// Wraps already-clamped data. Callers guarantee length and range.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        let n = self.width * self.channels;
        &self.data[y * n..(y + 1) * n]
    }

    /// Channel-mean luminance as a scalar map.
    pub fn to_gray(&self) -> ScalarMap {
        let inv = 1.0 / self.channels as f32;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|p| p.iter().sum::<f32>() * inv)
            .collect();
        ScalarMap::from_raw(self.width, self.height, data)
    }

    /// Bilinear sample at continuous `(x, y)` writing one value per channel into `out`.
    /// Coordinates outside the raster are clamped to the border.
    #[inline]
    pub fn sample_into(&self, x: f32, y: f32, out: &mut [f32]) {
        let (i00, i10, i01, i11, fx, fy) = bilinear_taps(self.width, self.height, x, y);
        let ch = self.channels;
        for (c, o) in out.iter_mut().enumerate().take(ch) {
            let p00 = self.data[i00 * ch + c];
            let p10 = self.data[i10 * ch + c];
            let p01 = self.data[i01 * ch + c];
            let p11 = self.data[i11 * ch + c];
            let top = p00 + fx * (p10 - p00);
            let bottom = p01 + fx * (p11 - p01);
            *o = top + fy * (bottom - top);
        }
    }
}

/// Bilinear interpolation of `img` at continuous column `x`, row `y`, with border clamping.
pub fn bilinear_sample(img: &ImageBuffer, x: f32, y: f32) -> Vec<f32> {
    let mut out = vec![0.0; img.channels()];
    img.sample_into(x, y, &mut out);
    out
}

/// Indices of the four neighbors (row-major pixel indices) and fractional offsets.
#[inline]
fn bilinear_taps(
    width: usize,
    height: usize,
    x: f32,
    y: f32,
) -> (usize, usize, usize, usize, f32, f32) {
    let xc = clamp_coord(x, width);
    let yc = clamp_coord(y, height);
    let x0 = xc.floor();
    let y0 = yc.floor();
    let fx = xc - x0;
    let fy = yc - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    (
        y0 * width + x0,
        y0 * width + x1,
        y1 * width + x0,
        y1 * width + x1,
        fx,
        fy,
    )
}

#[inline]
fn clamp_coord(v: f32, n: usize) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, (n - 1) as f32)
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel displacement `(u, v)` in pixels: `u` rightward, `v` downward.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("empty flow field {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::size("flow data length", width * height, data.len()));
        }
        if let Some(i) = data
            .iter()
            .position(|d| !d[0].is_finite() || !d[1].is_finite())
        {
            return Err(Error::InvalidFlow {
                x: i % width,
                y: i / width,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f32; 2]) -> Self {
        assert!(uv[0].is_finite() && uv[1].is_finite());
        Self {
            width,
            height,
            data: vec![uv; width * height],
        }
    }

    /// Builds a field from a per-pixel function. Panics on non-finite output.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 2],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let d = f(x, y);
                assert!(
                    d[0].is_finite() && d[1].is_finite(),
                    "non-finite flow at ({x}, {y})"
                );
                data.push(d);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<[f32; 2]>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[[f32; 2]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[[f32; 2]] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// The `v` (row) component as a scalar map.
    pub fn vertical(&self) -> ScalarMap {
        ScalarMap::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|d| d[1]).collect(),
        )
    }

    pub fn negate(&self) -> FlowField {
        FlowField::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|d| [-d[0], -d[1]]).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &FlowField) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f32::max)
    }
}

/// Per-pixel scalar: correction maps, masks, coverage, exposure times.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("empty scalar map {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::size("scalar map length", width * height, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite scalar at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(value.is_finite());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a map from a per-pixel function. Panics on non-finite output.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite scalar at ({x}, {y})");
                data.push(v);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Single-channel image of this map, clamped to `[0, 1]`.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::from_raw(
            self.width,
            self.height,
            1,
            self.data.iter().map(|&v| clamp_unit(v)).collect(),
        )
    }
}

pub(crate) fn check_dims(what: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::size(
            what,
            format!("{}x{}", a.0, a.1),
            format!("{}x{}", b.0, b.1),
        ));
    }
    Ok(())
}
