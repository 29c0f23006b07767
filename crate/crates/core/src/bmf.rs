//! Bilateral motion fields: per-pixel correction maps that turn the two
//! inter-frame flows into displacement fields carrying each rolling-shutter
//! frame to the global-shutter canvas at time `t`.
//!
//! `U_{0->t} = C_{0->t} * F_{0->1}` and `U_{1->t} = C_{1->t} * F_{1->0}`.
//! The approximate maps are `C_0 = t - tau_0`, `C_1 = tau_1 - t`; the geometric
//! maps additionally scale by `(h - gamma*pi_v)/h` and `(h + gamma*pi'_v)/h`
//! where `pi_v`, `pi'_v` are the latent global-shutter vertical flows recovered
//! from the rolling-shutter vertical flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_dims, FlowField, ScalarMap};
use crate::shutter::{Frame, ShutterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BmfMode {
    /// Correction maps depend only on exposure time.
    #[default]
    Abmf,
    /// Correction maps refined by the vertical-flow geometry term.
    Geo,
}

impl std::str::FromStr for BmfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abmf" => Ok(BmfMode::Abmf),
            "geo" => Ok(BmfMode::Geo),
            _ => Err(Error::Invalid(format!(
                "unknown bmf mode `{s}` (expected abmf|geo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmfConfig {
    pub mode: BmfMode,
    /// Minimum `|t1 - tau|` accepted by [`retime_bmf`].
    pub retime_epsilon: f64,
}

impl Default for BmfConfig {
    fn default() -> Self {
        Self {
            mode: BmfMode::Abmf,
            retime_epsilon: 1e-3,
        }
    }
}

impl BmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retime_epsilon.is_nan() || self.retime_epsilon <= 0.0 {
            return Err(Error::Invalid(format!(
                "retime_epsilon must be > 0, got {}",
                self.retime_epsilon
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Range {
            what: "t",
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Approximate correction maps `C_0 = t - tau_0`, `C_1 = tau_1 - t`.
pub fn abmf_correction_maps(
    spec: &ShutterSpec,
    t: f64,
    width: usize,
) -> Result<(ScalarMap, ScalarMap)> {
    check_time(t)?;
    let c0 = ScalarMap::from_fn(width, spec.h(), |_, y| {
        (t - spec.time_at(Frame::Zero, y as f64)) as f32
    });
    let c1 = ScalarMap::from_fn(width, spec.h(), |_, y| {
        (spec.time_at(Frame::One, y as f64) - t) as f32
    });
    Ok((c0, c1))
}

/// Latent vertical flow from the forward (frame 0 to 1) vertical flow:
/// `pi_v = h * f_v / (h + f_v)`.
pub fn pi_from_vertical_flow(f_v: &ScalarMap, h: usize) -> Result<ScalarMap> {
    latent_vertical_flow(f_v, h, 1.0)
}

/// Latent vertical flow from the backward (frame 1 to 0) vertical flow:
/// `pi'_v = h * f'_v / (h - f'_v)`, i.e. `-pi(-f'_v)`.
pub fn pi_from_backward_vertical_flow(f_v: &ScalarMap, h: usize) -> Result<ScalarMap> {
    latent_vertical_flow(f_v, h, -1.0)
}

fn latent_vertical_flow(f_v: &ScalarMap, h: usize, sign: f64) -> Result<ScalarMap> {
    let hf = h as f64;
    let mut out = Vec::with_capacity(f_v.data().len());
    for (i, &f) in f_v.data().iter().enumerate() {
        let f = f as f64;
        let denom = hf + sign * f;
        if denom.is_nan() || denom.abs() < 1.0 {
            return Err(Error::DegenerateFlow {
                x: i % f_v.width(),
                y: i / f_v.width(),
                denom: denom.abs(),
            });
        }
        out.push((hf * f / denom) as f32);
    }
    Ok(ScalarMap::from_raw(f_v.width(), f_v.height(), out))
}

/// Geometry-refined correction maps:
/// `C_0 = (t - tau_0)(h - gamma*pi_v)/h`, `C_1 = (tau_1 - t)(h + gamma*pi'_v)/h`.
///
/// Rows with zero vertical flow get exactly the approximate maps.
pub fn geo_correction_maps(
    spec: &ShutterSpec,
    t: f64,
    f01: &FlowField,
    f10: &FlowField,
) -> Result<(ScalarMap, ScalarMap)> {
    check_time(t)?;
    check_dims("F01 vs F10", f01.dims(), f10.dims())?;
    if f01.height() != spec.h() {
        return Err(Error::size(
            "flow height vs scanline count",
            spec.h(),
            f01.height(),
        ));
    }
    let pi = pi_from_vertical_flow(&f01.vertical(), spec.h())?;
    let pi_back = pi_from_backward_vertical_flow(&f10.vertical(), spec.h())?;
    let h = spec.h() as f64;
    let gamma = spec.gamma();
    let c0 = ScalarMap::from_fn(f01.width(), spec.h(), |x, y| {
        let geom = (h - gamma * pi.get(x, y) as f64) / h;
        ((t - spec.time_at(Frame::Zero, y as f64)) * geom) as f32
    });
    let c1 = ScalarMap::from_fn(f01.width(), spec.h(), |x, y| {
        let geom = (h + gamma * pi_back.get(x, y) as f64) / h;
        ((spec.time_at(Frame::One, y as f64) - t) * geom) as f32
    });
    Ok((c0, c1))
}

/// Correction maps for `mode`.
pub fn correction_maps(
    mode: BmfMode,
    spec: &ShutterSpec,
    t: f64,
    f01: &FlowField,
    f10: &FlowField,
) -> Result<(ScalarMap, ScalarMap)> {
    match mode {
        BmfMode::Abmf => {
            check_dims("F01 vs F10", f01.dims(), f10.dims())?;
            if f01.height() != spec.h() {
                return Err(Error::size(
                    "flow height vs scanline count",
                    spec.h(),
                    f01.height(),
                ));
            }
            abmf_correction_maps(spec, t, f01.width())
        }
        BmfMode::Geo => geo_correction_maps(spec, t, f01, f10),
    }
}

/// `U(x) = C(x) * F(x)`.
pub fn scale_flow_to_bmf(c: &ScalarMap, f: &FlowField) -> Result<FlowField> {
    check_dims("correction map vs flow", c.dims(), f.dims())?;
    let data = c
        .data()
        .iter()
        .zip(f.data())
        .map(|(&k, d)| [k * d[0], k * d[1]])
        .collect();
    Ok(FlowField::from_raw(f.width(), f.height(), data))
}

/// Converts a motion field targeting `t1` into one targeting `t2` by the per-row
/// factor `(t2 - tau) / (t1 - tau)`.
/// Scale `(t2 - tau) / (t1 - tau)` mapping a row's motion at `t1` to `t2`, or
/// `None` when `|t1 - tau|` is below `epsilon`.
pub fn retime_factor(tau: f64, t1: f64, t2: f64, epsilon: f64) -> Option<f64> {
    let gap = t1 - tau;
    (gap.abs() >= epsilon).then(|| (t2 - tau) / gap)
}

pub fn retime_bmf(
    u: &FlowField,
    spec: &ShutterSpec,
    frame: Frame,
    t1: f64,
    t2: f64,
    cfg: &BmfConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    if u.height() != spec.h() {
        return Err(Error::size(
            "motion field height vs scanline count",
            spec.h(),
            u.height(),
        ));
    }
    let mut factors = Vec::with_capacity(spec.h());
    for row in 0..spec.h() {
        let tau = spec.time_at(frame, row as f64);
        let k = retime_factor(tau, t1, t2, cfg.retime_epsilon).ok_or(Error::SingularRetime {
            row,
            gap: (t1 - tau).abs(),
            epsilon: cfg.retime_epsilon,
        })?;
        factors.push(k);
    }
    if t1 == t2 {
        return Ok(u.clone());
    }
    let w = u.width();
    let data = u
        .data()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let k = factors[i / w];
            [(d[0] as f64 * k) as f32, (d[1] as f64 * k) as f32]
        })
        .collect();
    Ok(FlowField::from_raw(w, u.height(), data))
}

/// `U + dU`.
pub fn apply_residual(u: &FlowField, du: &FlowField) -> Result<FlowField> {
    check_dims("motion field vs residual", u.dims(), du.dims())?;
    let data = u
        .data()
        .iter()
        .zip(du.data())
        .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
        .collect();
    Ok(FlowField::from_raw(u.width(), u.height(), data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalRatioStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

/// Statistics of `|f_v / (h + f_v)|` over all pixels (population std).
pub fn vertical_ratio_stats(f: &FlowField, h: usize) -> Result<VerticalRatioStats> {
    let hf = h as f64;
    let n = f.data().len() as f64;
    let mut ratios = Vec::with_capacity(f.data().len());
    for (i, d) in f.data().iter().enumerate() {
        let fv = d[1] as f64;
        let denom = hf + fv;
        if denom.is_nan() || denom.abs() < 1.0 {
            return Err(Error::DegenerateFlow {
                x: i % f.width(),
                y: i / f.width(),
                denom: denom.abs(),
            });
        }
        ratios.push((fv / denom).abs());
    }
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(VerticalRatioStats {
        mean,
        std: var.sqrt(),
        max,
    })
}
