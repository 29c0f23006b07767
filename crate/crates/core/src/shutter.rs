//! Scanline/time arithmetic for a rolling-shutter readout.
//!
//! Time is measured in frame intervals. Scanline `s` of frame `i` is exposed at
//! `t = i + gamma * (s - h/2) / h`, so the central scanline of frame 0 sits at
//! `t = 0`, that of frame 1 at `t = 1`, and scanline 0 of frame `i` at
//! `i - gamma/2`. Scanlines are 0-based row indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ScalarMap;

/// Readout geometry: scanline count and readout time ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShutterSpec {
    h: usize,
    gamma: f64,
}

impl ShutterSpec {
    pub fn new(h: usize, gamma: f64) -> Result<Self> {
        if h < 2 {
            return Err(Error::Invalid(format!(
                "scanline count must be >= 2, got {h}"
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Range {
                what: "readout ratio gamma",
                value: gamma,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self { h, gamma })
    }

    /// `gamma = 1`: the readout spans the whole inter-frame interval.
    pub fn full_readout(h: usize) -> Result<Self> {
        Self::new(h, 1.0)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Exposure time of (possibly fractional, possibly out-of-raster) scanline `s`.
    #[inline]
    pub fn time_at(&self, frame: Frame, s: f64) -> f64 {
        let h = self.h as f64;
        frame.offset() + self.gamma * ((s - h / 2.0) / h)
    }

    /// Inverse of [`ShutterSpec::time_at`] without range checks.
    #[inline]
    pub fn scanline_at(&self, frame: Frame, t: f64) -> f64 {
        let h = self.h as f64;
        (t - frame.offset()) * h / self.gamma + h / 2.0
    }

    /// Exposure window `[first, last]` scanline times of a frame.
    pub fn exposure_window(&self, frame: Frame) -> (f64, f64) {
        (
            self.time_at(frame, 0.0),
            self.time_at(frame, (self.h - 1) as f64),
        )
    }
}

/// Which of the two consecutive rolling-shutter frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Zero,
    One,
}

impl Frame {
    pub fn offset(self) -> f64 {
        match self {
            Frame::Zero => 0.0,
            Frame::One => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Frame::Zero => 0,
            Frame::One => 1,
        }
    }

    pub fn other(self) -> Frame {
        match self {
            Frame::Zero => Frame::One,
            Frame::One => Frame::Zero,
        }
    }
}

impl TryFrom<usize> for Frame {
    type Error = Error;

    fn try_from(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Frame::Zero),
            1 => Ok(Frame::One),
            _ => Err(Error::Invalid(format!(
                "frame index must be 0 or 1, got {i}"
            ))),
        }
    }
}

const SCANLINE_SLACK: f64 = 1e-9;

pub fn scanline_to_time(spec: &ShutterSpec, frame: Frame, s: f64) -> Result<f64> {
    let last = (spec.h - 1) as f64;
    if !(s >= 0.0 && s <= last) {
        return Err(Error::Range {
            what: "scanline",
            value: s,
            lo: 0.0,
            hi: last,
        });
    }
    Ok(spec.time_at(frame, s))
}

pub fn time_to_scanline(spec: &ShutterSpec, frame: Frame, t: f64) -> Result<f64> {
    let s = spec.scanline_at(frame, t);
    let last = (spec.h - 1) as f64;
    if !(s >= -SCANLINE_SLACK && s <= last + SCANLINE_SLACK) {
        let (lo, hi) = spec.exposure_window(frame);
        return Err(Error::Range {
            what: "time",
            value: t,
            lo,
            hi,
        });
    }
    Ok(s.clamp(0.0, last))
}

/// Per-pixel exposure time of `frame`; every row holds its scanline's time.
pub fn exposure_time_map(spec: &ShutterSpec, frame: Frame, width: usize) -> ScalarMap {
    assert!(width >= 1, "width must be >= 1");
    ScalarMap::from_fn(width, spec.h, |_, y| spec.time_at(frame, y as f64) as f32)
}
