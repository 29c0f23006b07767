//! Image quality metrics and the non-perceptual training losses, used here
//! as evaluation scores.
//!
//! Masked variants count a pixel when its mask weight is at least 0.5.

use crate::error::{Error, Result};
use crate::raster::{check_dims, FlowField, ImageBuffer, ScalarMap};

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_pair(pred: &ImageBuffer, gt: &ImageBuffer, mask: Option<&ScalarMap>) -> Result<()> {
    check_dims("prediction vs ground truth", pred.dims(), gt.dims())?;
    if pred.channels() != gt.channels() {
        return Err(Error::size("channel count", gt.channels(), pred.channels()));
    }
    if let Some(m) = mask {
        check_dims("image vs mask", pred.dims(), m.dims())?;
    }
    Ok(())
}

/// Mean of `err(pred - gt)` over included pixels and all channels.
fn masked_mean(
    pred: &ImageBuffer,
    gt: &ImageBuffer,
    mask: Option<&ScalarMap>,
    err: impl Fn(f64) -> f64,
) -> Result<f64> {
    check_pair(pred, gt, mask)?;
    let ch = pred.channels();
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (q, (a, b)) in pred
        .data()
        .chunks_exact(ch)
        .zip(gt.data().chunks_exact(ch))
        .enumerate()
    {
        if mask.is_some_and(|m| m.data()[q] < 0.5) {
            continue;
        }
        count += 1;
        for (x, y) in a.iter().zip(b) {
            sum += err(*x as f64 - *y as f64);
        }
    }
    if count == 0 {
        return Err(Error::Evaluation("mask excludes every pixel".into()));
    }
    Ok(sum / (count * ch) as f64)
}

pub fn l1_loss(pred: &ImageBuffer, gt: &ImageBuffer, mask: Option<&ScalarMap>) -> Result<f64> {
    masked_mean(pred, gt, mask, f64::abs)
}

pub fn mse(pred: &ImageBuffer, gt: &ImageBuffer, mask: Option<&ScalarMap>) -> Result<f64> {
    masked_mean(pred, gt, mask, |d| d * d)
}

/// PSNR in dB for peak 1.0 from a mean squared error, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(pred: &ImageBuffer, gt: &ImageBuffer, mask: Option<&ScalarMap>) -> Result<f64> {
    Ok(psnr_from_mse(mse(pred, gt, mask)?))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-region separable filtering of a `w x h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|i| k[i] * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) of the channel-mean
/// luminance, dynamic range 1.
pub fn ssim(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<f64> {
    check_pair(pred, gt, None)?;
    let (w, h) = pred.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Evaluation(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = pred.to_gray().data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = gt.to_gray().data().iter().map(|&v| v as f64).collect();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let k = gaussian_kernel();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let xx = filter_valid(&prod(&x, &x), w, h, &k);
    let yy = filter_valid(&prod(&y, &y), w, h, &k);
    let xy = filter_valid(&prod(&x, &y), w, h, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cxy = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Mean of the two candidates' per-pixel L1 errors against the ground truth.
pub fn contextual_consistency(
    i0t: &ImageBuffer,
    i1t: &ImageBuffer,
    gt: &ImageBuffer,
) -> Result<f64> {
    Ok(0.5 * (l1_loss(i0t, gt, None)? + l1_loss(i1t, gt, None)?))
}

/// Mean over pixels of the L2 norm of the flow Jacobian estimated with forward
/// differences (backward differences on the last row/column).
pub fn tv_energy(u: &FlowField) -> f64 {
    let (w, h) = u.dims();
    let diff = |a: [f32; 2], b: [f32; 2]| [(b[0] - a[0]) as f64, (b[1] - a[1]) as f64];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let dx = match (x + 1 < w, x > 0) {
                (true, _) => diff(u.get(x, y), u.get(x + 1, y)),
                (false, true) => diff(u.get(x - 1, y), u.get(x, y)),
                _ => [0.0, 0.0],
            };
            let dy = match (y + 1 < h, y > 0) {
                (true, _) => diff(u.get(x, y), u.get(x, y + 1)),
                (false, true) => diff(u.get(x, y - 1), u.get(x, y)),
                _ => [0.0, 0.0],
            };
            total += (dx[0] * dx[0] + dx[1] * dx[1] + dy[0] * dy[0] + dy[1] * dy[1]).sqrt();
        }
    }
    total / (w * h) as f64
}
