//! Backward bilinear warping and forward splatting.
//!
//! Forward splatting scatters every source pixel onto the four target pixels
//! around its landing point with bilinear weights. Overlaps are resolved
//! either by plain weighted averaging (`Sum`) or by softmax weighting with a
//! per-pixel importance `Z` (`Softmax`).
//!
//! The scatter is run over fixed bands of source rows. Each band accumulates
//! into private buffers and bands are merged in band order, so the result is
//! bit-identical for any rayon pool size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_dims, clamp_unit, FlowField, ImageBuffer, ScalarMap};

/// Source rows per scatter band. Fixed so that the merge order never depends
/// on the number of workers.
const BAND_ROWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplatMode {
    Sum,
    #[default]
    Softmax,
}

impl std::str::FromStr for SplatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(SplatMode::Sum),
            "softmax" => Ok(SplatMode::Softmax),
            _ => Err(Error::Invalid(format!(
                "unknown splat mode `{s}` (expected sum|softmax)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatConfig {
    pub mode: SplatMode,
    /// Sharpness of the brightness-constancy importance.
    pub alpha: f32,
    /// Minimum accumulated bilinear weight for a target pixel to be valid.
    pub coverage_epsilon: f32,
}

impl Default for SplatConfig {
    fn default() -> Self {
        Self {
            mode: SplatMode::Softmax,
            alpha: 50.0,
            coverage_epsilon: 1e-4,
        }
    }
}

impl SplatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.coverage_epsilon.is_nan() || self.coverage_epsilon <= 0.0 {
            return Err(Error::Invalid(format!(
                "coverage_epsilon must be > 0, got {}",
                self.coverage_epsilon
            )));
        }
        Ok(())
    }
}

/// `out(x) = img(x + flow(x))`, bilinear with border clamping.
pub fn backward_warp(img: &ImageBuffer, flow: &FlowField) -> Result<ImageBuffer> {
    check_dims("image vs flow", img.dims(), flow.dims())?;
    let (w, h) = img.dims();
    let ch = img.channels();
    let mut data = vec![0.0f32; w * h * ch];
    data.par_chunks_mut(w * ch)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, d) in flow.row(y).iter().enumerate() {
                let out = &mut row[x * ch..(x + 1) * ch];
                img.sample_into(x as f32 + d[0], y as f32 + d[1], out);
                for v in out.iter_mut() {
                    *v = clamp_unit(*v);
                }
            }
        });
    Ok(ImageBuffer::from_raw(w, h, ch, data))
}

/// Brightness-constancy importance `Z = -alpha * mean_c |I0 - warp(I1, F01)|`.
pub fn brightness_importance(
    i0: &ImageBuffer,
    i1: &ImageBuffer,
    f01: &FlowField,
    alpha: f32,
) -> Result<ScalarMap> {
    check_dims("I0 vs I1", i0.dims(), i1.dims())?;
    if i0.channels() != i1.channels() {
        return Err(Error::size("channel count", i0.channels(), i1.channels()));
    }
    let warped = backward_warp(i1, f01)?;
    let ch = i0.channels();
    let data = i0
        .data()
        .chunks_exact(ch)
        .zip(warped.data().chunks_exact(ch))
        .map(|(a, b)| {
            let err: f32 = a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f32>() / ch as f32;
            -alpha * err
        })
        .collect();
    Ok(ScalarMap::from_raw(i0.width(), i0.height(), data))
}

/// Forward-warped image plus the accumulated bilinear weight at every target.
#[derive(Debug, Clone, PartialEq)]
pub struct Splatted {
    pub image: ImageBuffer,
    pub coverage: ScalarMap,
}

/// Forward splatting of `src` along `u`.
///
/// Each source pixel `p` lands at `p + u(p)` and deposits bilinear weights `w`
/// on the four surrounding targets; deposits outside the raster are dropped.
/// In softmax mode a deposit is further weighted by `exp(Z(p) - m(q))` where
/// `m(q)` is the largest importance reaching target `q`. `coverage` is the sum
/// of the bilinear weights `w`; targets with coverage below
/// `cfg.coverage_epsilon` are set to 0.
pub fn forward_splat(
    src: &ImageBuffer,
    u: &FlowField,
    z: &ScalarMap,
    cfg: &SplatConfig,
) -> Result<Splatted> {
    cfg.validate()?;
    check_dims("source vs motion field", src.dims(), u.dims())?;
    check_dims("source vs importance", src.dims(), z.dims())?;
    let (w, h) = src.dims();
    for (i, d) in u.data().iter().enumerate() {
        if !(d[0].is_finite() && d[1].is_finite()) {
            return Err(Error::InvalidFlow { x: i % w, y: i / w });
        }
    }
    if let Some(i) = z.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!(
            "non-finite importance at ({}, {})",
            i % w,
            i / w
        )));
    }

    let bands: Vec<(usize, usize)> = (0..h)
        .step_by(BAND_ROWS)
        .map(|y0| (y0, (y0 + BAND_ROWS).min(h)))
        .collect();

    let target_max = match cfg.mode {
        SplatMode::Sum => None,
        SplatMode::Softmax => Some(scatter_max(u, z, &bands)),
    };

    let ch = src.channels();
    let partials: Vec<BandAccum> = bands
        .par_iter()
        .map(|&(y0, y1)| accumulate_band(src, u, z, target_max.as_deref(), y0, y1))
        .collect();

    let mut num = vec![0.0f64; w * h * ch];
    let mut den = vec![0.0f64; w * h];
    let mut cov = vec![0.0f64; w * h];
    for band in &partials {
        let base = band.row_lo * w;
        for (i, v) in band.den.iter().enumerate() {
            den[base + i] += v;
        }
        for (i, v) in band.cov.iter().enumerate() {
            cov[base + i] += v;
        }
        for (i, v) in band.num.iter().enumerate() {
            num[base * ch + i] += v;
        }
    }

    let eps = cfg.coverage_epsilon as f64;
    let mut out = vec![0.0f32; w * h * ch];
    for q in 0..w * h {
        if cov[q] >= eps && den[q] > 0.0 {
            for c in 0..ch {
                out[q * ch + c] = clamp_unit((num[q * ch + c] / den[q]) as f32);
            }
        }
    }
    Ok(Splatted {
        image: ImageBuffer::from_raw(w, h, ch, out),
        coverage: ScalarMap::from_raw(w, h, cov.into_iter().map(|v| v as f32).collect()),
    })
}

/// Up to four `(target index, bilinear weight)` deposits of source pixel `(x, y)`.
#[inline]
fn deposits(
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    d: [f32; 2],
) -> impl Iterator<Item = (usize, f64)> {
    let lx = x as f64 + d[0] as f64;
    let ly = y as f64 + d[1] as f64;
    let fx0 = lx.floor();
    let fy0 = ly.floor();
    let ax = lx - fx0;
    let ay = ly - fy0;
    let x0 = fx0 as i64;
    let y0 = fy0 as i64;
    [
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x0 + 1, y0, ax * (1.0 - ay)),
        (x0, y0 + 1, (1.0 - ax) * ay),
        (x0 + 1, y0 + 1, ax * ay),
    ]
    .into_iter()
    .filter(move |&(tx, ty, wt)| {
        wt > 0.0 && tx >= 0 && ty >= 0 && (tx as usize) < w && (ty as usize) < h
    })
    .map(move |(tx, ty, wt)| (ty as usize * w + tx as usize, wt))
}

/// Row range of targets a band of source rows can reach.
fn band_target_rows(u: &FlowField, y0: usize, y1: usize) -> Option<(usize, usize)> {
    let h = u.height();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in y0..y1 {
        for d in u.row(y) {
            let ly = y as f64 + d[1] as f64;
            lo = lo.min(ly.floor());
            hi = hi.max(ly.floor() + 1.0);
        }
    }
    let lo = lo.max(0.0);
    let hi = hi.min((h - 1) as f64);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Largest importance reaching each target (`-inf` where nothing lands).
fn scatter_max(u: &FlowField, z: &ScalarMap, bands: &[(usize, usize)]) -> Vec<f64> {
    let (w, h) = u.dims();
    let partials: Vec<Option<(usize, Vec<f64>)>> = bands
        .par_iter()
        .map(|&(y0, y1)| {
            let (lo, hi) = band_target_rows(u, y0, y1)?;
            let mut local = vec![f64::NEG_INFINITY; (hi - lo + 1) * w];
            for y in y0..y1 {
                for (x, d) in u.row(y).iter().enumerate() {
                    let zp = z.get(x, y) as f64;
                    for (q, _) in deposits(w, h, x, y, *d) {
                        let slot = &mut local[q - lo * w];
                        *slot = slot.max(zp);
                    }
                }
            }
            Some((lo, local))
        })
        .collect();
    let mut m = vec![f64::NEG_INFINITY; w * h];
    for (lo, local) in partials.into_iter().flatten() {
        for (i, v) in local.into_iter().enumerate() {
            let slot = &mut m[lo * w + i];
            *slot = slot.max(v);
        }
    }
    m
}

struct BandAccum {
    row_lo: usize,
    num: Vec<f64>,
    den: Vec<f64>,
    cov: Vec<f64>,
}

fn accumulate_band(
    src: &ImageBuffer,
    u: &FlowField,
    z: &ScalarMap,
    target_max: Option<&[f64]>,
    y0: usize,
    y1: usize,
) -> BandAccum {
    let (w, h) = src.dims();
    let ch = src.channels();
    let Some((lo, hi)) = band_target_rows(u, y0, y1) else {
        return BandAccum {
            row_lo: 0,
            num: Vec::new(),
            den: Vec::new(),
            cov: Vec::new(),
        };
    };
    let n = (hi - lo + 1) * w;
    let mut acc = BandAccum {
        row_lo: lo,
        num: vec![0.0; n * ch],
        den: vec![0.0; n],
        cov: vec![0.0; n],
    };
    for y in y0..y1 {
        for (x, d) in u.row(y).iter().enumerate() {
            let px = src.pixel(x, y);
            let zp = z.get(x, y) as f64;
            for (q, wt) in deposits(w, h, x, y, *d) {
                let k = match target_max {
                    None => wt,
                    Some(m) => wt * (zp - m[q]).exp(),
                };
                let local = q - lo * w;
                acc.cov[local] += wt;
                acc.den[local] += k;
                for (c, v) in px.iter().enumerate() {
                    acc.num[local * ch + c] += k * *v as f64;
                }
            }
        }
    }
    acc
}

/// Linear ramp from 0 to 1 over `[0, 1]` coverage, hard zero below `eps`.
pub fn coverage_to_mask(coverage: &ScalarMap, eps: f32) -> ScalarMap {
    coverage_to_mask_with_saturation(coverage, eps, 1.0)
}

pub fn coverage_to_mask_with_saturation(
    coverage: &ScalarMap,
    eps: f32,
    saturation: f32,
) -> ScalarMap {
    assert!(eps > 0.0 && saturation > 0.0);
    let data = coverage
        .data()
        .iter()
        .map(|&c| {
            if c < eps {
                0.0
            } else {
                (c / saturation).min(1.0)
            }
        })
        .collect();
    ScalarMap::from_raw(coverage.width(), coverage.height(), data)
}
