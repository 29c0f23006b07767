//! Global-shutter frame synthesis from two rolling-shutter frames.
//!
//! Pipeline per target time `t`: correction maps, bilateral motion fields,
//! optional residuals, forward splatting of both frames, coverage-derived
//! occlusion masks, and time-weighted fusion
//! `I_t = [(1-t) O0 I0t + t O1 I1t] / [(1-t) O0 + t O1]`.

use serde::{Deserialize, Serialize};

use crate::bmf::{apply_residual, check_time, correction_maps, scale_flow_to_bmf, BmfConfig};
use crate::error::{Error, Result};
use crate::raster::{check_dims, clamp_unit, FlowField, ImageBuffer, ScalarMap};
use crate::shutter::ShutterSpec;
use crate::warp::{brightness_importance, coverage_to_mask, forward_splat, SplatConfig, SplatMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// `O1 = 1 - O0`, `O0 = cov0 / (cov0 + cov1)`.
    #[default]
    Complement,
    /// Each mask from its own coverage.
    Independent,
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complement" => Ok(MaskMode::Complement),
            "independent" => Ok(MaskMode::Independent),
            _ => Err(Error::Invalid(format!(
                "unknown mask mode `{s}` (expected complement|independent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    pub bmf: BmfConfig,
    pub splat: SplatConfig,
    pub mask_mode: MaskMode,
    pub fusion_epsilon: f32,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            bmf: BmfConfig::default(),
            splat: SplatConfig::default(),
            mask_mode: MaskMode::Complement,
            fusion_epsilon: 1e-4,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        self.bmf.validate()?;
        self.splat.validate()?;
        if self.fusion_epsilon.is_nan() || self.fusion_epsilon <= 0.0 {
            return Err(Error::Invalid(format!(
                "fusion_epsilon must be > 0, got {}",
                self.fusion_epsilon
            )));
        }
        Ok(())
    }
}

/// Output of [`reconstruct`] with every intermediate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub t: f64,
    /// Fused global-shutter frame.
    pub frame: ImageBuffer,
    /// 1 where neither candidate provides content.
    pub hole_mask: ScalarMap,
    /// Frames 0 and 1 splatted to time `t`.
    pub candidates: [ImageBuffer; 2],
    /// Splat coverage of each candidate.
    pub coverage: [ScalarMap; 2],
    pub masks: [ScalarMap; 2],
    /// Motion fields `U_{0->t}`, `U_{1->t}` (after residuals).
    pub bmf: [FlowField; 2],
}

impl ReconstructionResult {
    pub fn hole_fraction(&self) -> f64 {
        let d = self.hole_mask.data();
        d.iter().filter(|&&v| v >= 0.5).count() as f64 / d.len() as f64
    }

    /// 1 where the frame holds recovered content.
    pub fn valid_mask(&self) -> ScalarMap {
        let d = self.hole_mask.data().iter().map(|&v| 1.0 - v).collect();
        ScalarMap::from_raw(self.hole_mask.width(), self.hole_mask.height(), d)
    }
}

pub fn derive_occlusion_masks(
    cov0: &ScalarMap,
    cov1: &ScalarMap,
    mode: MaskMode,
    eps: f32,
) -> Result<(ScalarMap, ScalarMap)> {
    check_dims("coverage 0 vs coverage 1", cov0.dims(), cov1.dims())?;
    let (w, h) = cov0.dims();
    match mode {
        MaskMode::Independent => Ok((coverage_to_mask(cov0, eps), coverage_to_mask(cov1, eps))),
        MaskMode::Complement => {
            let o0: Vec<f32> = cov0
                .data()
                .iter()
                .zip(cov1.data())
                .map(|(&a, &b)| {
                    let (a, b) = (a.max(0.0), b.max(0.0));
                    if a + b >= eps {
                        (a / (a + b)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                })
                .collect();
            let o1 = o0.iter().map(|&v| 1.0 - v).collect();
            Ok((ScalarMap::from_raw(w, h, o0), ScalarMap::from_raw(w, h, o1)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub image: ImageBuffer,
    pub hole_mask: ScalarMap,
}

/// Time-weighted fusion of the two candidates. Pixels whose weight
/// `(1-t) O0 + t O1` is below `eps` are black and flagged in the hole mask.
pub fn fuse(
    i0t: &ImageBuffer,
    i1t: &ImageBuffer,
    o0: &ScalarMap,
    o1: &ScalarMap,
    t: f64,
    eps: f32,
) -> Result<Fused> {
    check_time(t)?;
    check_dims("candidate 0 vs candidate 1", i0t.dims(), i1t.dims())?;
    check_dims("candidate vs mask 0", i0t.dims(), o0.dims())?;
    check_dims("candidate vs mask 1", i0t.dims(), o1.dims())?;
    if i0t.channels() != i1t.channels() {
        return Err(Error::size(
            "candidate channels",
            i0t.channels(),
            i1t.channels(),
        ));
    }
    let (w, h) = i0t.dims();
    let ch = i0t.channels();
    let t = t as f32;
    let mut out = vec![0.0f32; w * h * ch];
    let mut holes = vec![0.0f32; w * h];
    for (q, hole) in holes.iter_mut().enumerate() {
        let a = (1.0 - t) * o0.data()[q];
        let b = t * o1.data()[q];
        let den = a + b;
        if den < eps {
            *hole = 1.0;
            continue;
        }
        for c in 0..ch {
            let k = q * ch + c;
            out[k] = clamp_unit((a * i0t.data()[k] + b * i1t.data()[k]) / den);
        }
    }
    Ok(Fused {
        image: ImageBuffer::from_raw(w, h, ch, out),
        hole_mask: ScalarMap::from_raw(w, h, holes),
    })
}

/// Reconstructs the global-shutter frame at time `t` with zero residuals.
pub fn reconstruct(
    rs0: &ImageBuffer,
    rs1: &ImageBuffer,
    f01: &FlowField,
    f10: &FlowField,
    t: f64,
    spec: &ShutterSpec,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    reconstruct_with_residuals(rs0, rs1, f01, f10, t, spec, cfg, None)
}

/// As [`reconstruct`], adding externally supplied residual motion
/// `(dU_{0->t}, dU_{1->t})` to the motion fields before splatting.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_with_residuals(
    rs0: &ImageBuffer,
    rs1: &ImageBuffer,
    f01: &FlowField,
    f10: &FlowField,
    t: f64,
    spec: &ShutterSpec,
    cfg: &ReconstructionConfig,
    residuals: Option<(&FlowField, &FlowField)>,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    check_time(t)?;
    check_dims("rs0 vs rs1", rs0.dims(), rs1.dims())?;
    check_dims("rs0 vs flow01", rs0.dims(), f01.dims())?;
    check_dims("rs0 vs flow10", rs0.dims(), f10.dims())?;
    if rs0.channels() != rs1.channels() {
        return Err(Error::size(
            "rs0 vs rs1 channels",
            rs0.channels(),
            rs1.channels(),
        ));
    }
    if rs0.height() != spec.h() {
        return Err(Error::size(
            "image height vs scanline count",
            spec.h(),
            rs0.height(),
        ));
    }

    let (c0, c1) = correction_maps(cfg.bmf.mode, spec, t, f01, f10)?;
    let mut u0 = scale_flow_to_bmf(&c0, f01)?;
    let mut u1 = scale_flow_to_bmf(&c1, f10)?;
    if let Some((du0, du1)) = residuals {
        u0 = apply_residual(&u0, du0)?;
        u1 = apply_residual(&u1, du1)?;
    }

    let (z0, z1) = match cfg.splat.mode {
        SplatMode::Sum => {
            let zero = ScalarMap::filled(rs0.width(), rs0.height(), 0.0);
            (zero.clone(), zero)
        }
        SplatMode::Softmax => (
            brightness_importance(rs0, rs1, f01, cfg.splat.alpha)?,
            brightness_importance(rs1, rs0, f10, cfg.splat.alpha)?,
        ),
    };
    let s0 = forward_splat(rs0, &u0, &z0, &cfg.splat)?;
    let s1 = forward_splat(rs1, &u1, &z1, &cfg.splat)?;

    // Candidates are black below the splat threshold; their masks must agree.
    let eps = cfg.splat.coverage_epsilon;
    let gate = |c: &ScalarMap| {
        let d = c
            .data()
            .iter()
            .map(|&v| if v < eps { 0.0 } else { v })
            .collect();
        ScalarMap::from_raw(c.width(), c.height(), d)
    };
    let (cov0, cov1) = (gate(&s0.coverage), gate(&s1.coverage));
    let (o0, o1) = derive_occlusion_masks(&cov0, &cov1, cfg.mask_mode, eps)?;
    let fused = fuse(&s0.image, &s1.image, &o0, &o1, t, cfg.fusion_epsilon)?;

    let holes: Vec<f32> = fused
        .hole_mask
        .data()
        .iter()
        .zip(cov0.data().iter().zip(cov1.data()))
        .map(|(&hm, (&a, &b))| {
            if hm > 0.0 || (a == 0.0 && b == 0.0) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (w, h) = rs0.dims();
    let mut frame = fused.image.into_data();
    let ch = rs0.channels();
    for (q, &hm) in holes.iter().enumerate() {
        if hm > 0.0 {
            frame[q * ch..(q + 1) * ch].fill(0.0);
        }
    }

    Ok(ReconstructionResult {
        t,
        frame: ImageBuffer::from_raw(w, h, ch, frame),
        hole_mask: ScalarMap::from_raw(w, h, holes),
        candidates: [s0.image, s1.image],
        coverage: [s0.coverage, s1.coverage],
        masks: [o0, o1],
        bmf: [u0, u1],
    })
}

/// One reconstruction per requested time, each computed directly.
pub fn reconstruct_sequence(
    rs0: &ImageBuffer,
    rs1: &ImageBuffer,
    f01: &FlowField,
    f10: &FlowField,
    times: &[f64],
    spec: &ShutterSpec,
    cfg: &ReconstructionConfig,
) -> Result<Vec<ReconstructionResult>> {
    for &t in times {
        check_time(t)?;
    }
    times
        .iter()
        .map(|&t| reconstruct(rs0, rs1, f01, f10, t, spec, cfg))
        .collect()
}
