//! Synthetic rolling-shutter camera.
//!
//! A scene is a textured plane translating at constant velocity, optionally
//! with a rectangular sprite moving at its own velocity on top. The virtual
//! global-shutter frame at time `t` samples the plane displaced by
//! `velocity * t`. A rolling-shutter frame copies each scanline from the
//! global-shutter frame at that scanline's exposure time, and the inter-frame
//! flow is solved exactly from the same motion.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{self, Manifest, ManifestFile};
use crate::raster::{FlowField, ImageBuffer};
use crate::shutter::{Frame, ShutterSpec};

/// Checkerboard levels.
const CHECKER_DARK: f64 = 0.2;
const CHECKER_LIGHT: f64 = 0.8;

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;

/// Damping factor of the scanline fixed-point iteration.
const SOLVER_RELAXATION: f64 = 0.75;
const SOLVER_MAX_ITERATIONS: usize = 50;
/// Rows.
const SOLVER_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    /// Square cells of side `period` pixels alternating 0.2 / 0.8.
    Checkerboard { period: f64 },
    /// Bilinearly interpolated random lattice with cell size `scale` pixels.
    ValueNoise { seed: u64, scale: f64 },
    /// `(1 - checker_weight) * noise + checker_weight * checkerboard`.
    NoiseChecker {
        period: f64,
        seed: u64,
        scale: f64,
        checker_weight: f64,
    },
    /// An image file tiled periodically over the plane.
    Image { path: PathBuf },
}

impl Texture {
    pub fn kind(&self) -> &'static str {
        match self {
            Texture::Checkerboard { .. } => "checkerboard",
            Texture::ValueNoise { .. } => "value_noise",
            Texture::NoiseChecker { .. } => "noise_checker",
            Texture::Image { .. } => "image",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "texture {name} must be > 0, got {v}"
                )))
            }
        };
        match self {
            Texture::Checkerboard { period } => positive("period", *period),
            Texture::ValueNoise { scale, .. } => positive("scale", *scale),
            Texture::NoiseChecker {
                period,
                scale,
                checker_weight,
                ..
            } => {
                positive("period", *period)?;
                positive("scale", *scale)?;
                if !(0.0..=1.0).contains(checker_weight) {
                    return Err(Error::Invalid(format!(
                        "checker_weight must be in [0, 1], got {checker_weight}"
                    )));
                }
                Ok(())
            }
            Texture::Image { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    #[inline]
    fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.width && py >= self.y && py < self.y + self.height
    }
}

/// A rectangle of texture translating independently of the background.
#[derive(Debug, Clone, PartialEq)]
pub struct Sprite {
    /// Placement at `t = 0`.
    pub rect: Rect,
    /// Pixels per frame interval.
    pub velocity: [f64; 2],
    /// Sampled in sprite-local coordinates.
    pub texture: Texture,
}

impl Sprite {
    #[inline]
    fn rect_at(&self, t: f64) -> Rect {
        Rect {
            x: self.rect.x + self.velocity[0] * t,
            y: self.rect.y + self.velocity[1] * t,
            ..self.rect
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    /// Pixels per frame interval.
    pub background_velocity: [f64; 2],
    pub sprite: Option<Sprite>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub texture: Texture,
    pub motion: MotionModel,
    /// Subsamples per axis.
    pub supersample: u32,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Invalid(format!(
                "scene must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(1..=4).contains(&self.supersample) {
            return Err(Error::Invalid(format!(
                "supersample must be in [1, 4], got {}",
                self.supersample
            )));
        }
        self.texture.validate()?;
        let half = self.height as f64 / 2.0;
        let mut velocities = vec![self.motion.background_velocity];
        if let Some(sprite) = &self.motion.sprite {
            sprite.texture.validate()?;
            if !(sprite.rect.width > 0.0 && sprite.rect.height > 0.0) {
                return Err(Error::Invalid("sprite size must be positive".into()));
            }
            if ![
                sprite.rect.x,
                sprite.rect.y,
                sprite.rect.width,
                sprite.rect.height,
            ]
            .iter()
            .all(|v| v.is_finite())
            {
                return Err(Error::Invalid("sprite rect must be finite".into()));
            }
            velocities.push(sprite.velocity);
        }
        for v in velocities {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::Invalid("velocities must be finite".into()));
            }
            if v[1].abs() >= half {
                return Err(Error::Invalid(format!(
                    "vertical velocity {} must satisfy |vy| < h/2 = {half}",
                    v[1]
                )));
            }
        }
        Ok(())
    }

    fn check_spec(&self, spec: &ShutterSpec) -> Result<()> {
        if spec.h() != self.height {
            return Err(Error::size(
                "scene height vs scanline count",
                spec.h(),
                self.height,
            ));
        }
        Ok(())
    }
}

/// Sampler for one texture with any image data loaded.
#[derive(Debug, Clone)]
enum TextureSampler {
    Procedural(Texture),
    Image(ImageBuffer),
}

impl TextureSampler {
    fn load(texture: &Texture) -> Result<Self> {
        match texture {
            Texture::Image { path } => Ok(TextureSampler::Image(io::read_image(path)?)),
            other => Ok(TextureSampler::Procedural(other.clone())),
        }
    }

    fn channels(&self) -> usize {
        match self {
            TextureSampler::Procedural(_) => 1,
            TextureSampler::Image(img) => img.channels(),
        }
    }

    /// Value at plane coordinate `(x, y)`, written into `out[..channels]`
    /// (gray textures broadcast to every channel).
    #[inline]
    fn sample(&self, x: f64, y: f64, out: &mut [f64]) {
        match self {
            TextureSampler::Procedural(t) => {
                let v = procedural(t, x, y);
                out.iter_mut().for_each(|o| *o = v);
            }
            TextureSampler::Image(img) => {
                let (w, h) = img.dims();
                let (x0, y0) = (x.floor(), y.floor());
                let (fx, fy) = (x - x0, y - y0);
                let wrap = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
                let (xa, xb) = (wrap(x0, w), wrap(x0 + 1.0, w));
                let (ya, yb) = (wrap(y0, h), wrap(y0 + 1.0, h));
                let gray = img.channels() == 1;
                for (c, o) in out.iter_mut().enumerate() {
                    let c = if gray { 0 } else { c };
                    let p = |xx, yy| img.get(xx, yy, c) as f64;
                    let top = p(xa, ya) + fx * (p(xb, ya) - p(xa, ya));
                    let bottom = p(xa, yb) + fx * (p(xb, yb) - p(xa, yb));
                    *o = top + fy * (bottom - top);
                }
            }
        }
    }
}

fn procedural(t: &Texture, x: f64, y: f64) -> f64 {
    match *t {
        Texture::Checkerboard { period } => checker(period, x, y),
        Texture::ValueNoise { seed, scale } => value_noise(seed, scale, x, y),
        Texture::NoiseChecker {
            period,
            seed,
            scale,
            checker_weight,
        } => {
            (1.0 - checker_weight) * value_noise(seed, scale, x, y)
                + checker_weight * checker(period, x, y)
        }
        Texture::Image { .. } => unreachable!("image textures are sampled from loaded data"),
    }
}

#[inline]
fn checker(period: f64, x: f64, y: f64) -> f64 {
    let cell = (x / period).floor() as i64 + (y / period).floor() as i64;
    if cell.rem_euclid(2) == 0 {
        CHECKER_DARK
    } else {
        CHECKER_LIGHT
    }
}

#[inline]
fn lcg(state: u64) -> u64 {
    state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC)
}

/// Lattice value in `[0, 1)` for integer cell corner `(ix, iy)`.
#[inline]
pub fn lattice_value(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut s = lcg(seed ^ 0x5851_f42d_4c95_7f2d);
    s = lcg(s ^ (ix as u64));
    s ^= s >> 29;
    s = lcg(s ^ (iy as u64));
    s ^= s >> 29;
    s = lcg(s);
    (s >> 40) as f64 / (1u64 << 24) as f64
}

#[inline]
fn value_noise(seed: u64, scale: f64, x: f64, y: f64) -> f64 {
    let (gx, gy) = (x / scale, y / scale);
    let (x0, y0) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - x0, gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = lattice_value(seed, ix, iy);
    let v10 = lattice_value(seed, ix + 1, iy);
    let v01 = lattice_value(seed, ix, iy + 1);
    let v11 = lattice_value(seed, ix + 1, iy + 1);
    let top = v00 + fx * (v10 - v00);
    let bottom = v01 + fx * (v11 - v01);
    top + fy * (bottom - top)
}

/// A validated scene with texture data loaded, ready to render.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    spec: SceneSpec,
    background: TextureSampler,
    sprite: Option<TextureSampler>,
    channels: usize,
}

impl PreparedScene {
    pub fn new(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let background = TextureSampler::load(&spec.texture)?;
        let sprite = spec
            .motion
            .sprite
            .as_ref()
            .map(|s| TextureSampler::load(&s.texture))
            .transpose()?;
        let channels = background
            .channels()
            .max(sprite.as_ref().map_or(1, TextureSampler::channels));
        Ok(Self {
            spec: spec.clone(),
            background,
            sprite,
            channels,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Row `y` of the global-shutter frame at time `t`.
    fn render_row(&self, t: f64, y: usize, out: &mut [f32]) {
        let ss = self.spec.supersample as usize;
        let ch = self.channels;
        let [vx, vy] = self.spec.motion.background_velocity;
        let sprite = self
            .spec
            .motion
            .sprite
            .as_ref()
            .zip(self.sprite.as_ref())
            .map(|(s, sampler)| (s.rect_at(t), sampler));
        let inv = 1.0 / (ss * ss) as f64;
        let mut acc = [0.0f64; 3];
        let mut v = [0.0f64; 3];
        for x in 0..self.spec.width {
            acc[..ch].fill(0.0);
            for sy in 0..ss {
                let py = y as f64 + (sy as f64 + 0.5) / ss as f64 - 0.5;
                for sx in 0..ss {
                    let px = x as f64 + (sx as f64 + 0.5) / ss as f64 - 0.5;
                    match sprite {
                        Some((rect, sampler)) if rect.contains(px, py) => {
                            sampler.sample(px - rect.x, py - rect.y, &mut v[..ch])
                        }
                        _ => self
                            .background
                            .sample(px - vx * t, py - vy * t, &mut v[..ch]),
                    }
                    for c in 0..ch {
                        acc[c] += v[c];
                    }
                }
            }
            for c in 0..ch {
                out[x * ch + c] = ((acc[c] * inv) as f32).clamp(0.0, 1.0);
            }
        }
    }

    pub fn render_gs(&self, t: f64) -> ImageBuffer {
        self.render_rows(|_| t)
    }

    pub fn render_rs(&self, spec: &ShutterSpec, frame: Frame) -> Result<ImageBuffer> {
        self.spec.check_spec(spec)?;
        Ok(self.render_rows(|y| spec.time_at(frame, y as f64)))
    }

    fn render_rows(&self, time_of_row: impl Fn(usize) -> f64 + Sync) -> ImageBuffer {
        let (w, h, ch) = (self.spec.width, self.spec.height, self.channels);
        let mut data = vec![0.0f32; w * h * ch];
        data.par_chunks_mut(w * ch)
            .enumerate()
            .for_each(|(y, row)| self.render_row(time_of_row(y), y, row));
        ImageBuffer::from_raw(w, h, ch, data)
    }

    /// Velocity of the surface seen at pixel `(x, y)` at time `t`.
    fn velocity_at(&self, x: usize, y: usize, t: f64) -> [f64; 2] {
        match &self.spec.motion.sprite {
            Some(s) if s.rect_at(t).contains(x as f64, y as f64) => s.velocity,
            _ => self.spec.motion.background_velocity,
        }
    }

    pub fn gt_flow(&self, spec: &ShutterSpec, direction: FlowDirection) -> Result<FlowField> {
        self.spec.check_spec(spec)?;
        let (src, dst) = direction.frames();
        let (w, h) = (self.spec.width, self.spec.height);
        let rows: Vec<Result<Vec<[f32; 2]>>> = (0..h)
            .into_par_iter()
            .map(|y| {
                let tau_src = spec.time_at(src, y as f64);
                (0..w)
                    .map(|x| {
                        let v = self.velocity_at(x, y, tau_src);
                        let y_dst = solve_scanline(spec, dst, y as f64, tau_src, v[1]).ok_or(
                            Error::Solver {
                                x,
                                y,
                                iterations: SOLVER_MAX_ITERATIONS,
                            },
                        )?;
                        let closed = closed_form_scanline(spec, dst, y as f64, tau_src, v[1]);
                        if (closed - y_dst).abs() > SOLVER_TOLERANCE {
                            return Err(Error::Solver {
                                x,
                                y,
                                iterations: SOLVER_MAX_ITERATIONS,
                            });
                        }
                        let dt = spec.time_at(dst, y_dst) - tau_src;
                        Ok([(v[0] * dt) as f32, (y_dst - y as f64) as f32])
                    })
                    .collect()
            })
            .collect();
        let mut data = Vec::with_capacity(w * h);
        for row in rows {
            data.extend(row?);
        }
        FlowField::new(w, h, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// Frame 0 to frame 1.
    Forward,
    /// Frame 1 to frame 0.
    Backward,
}

impl FlowDirection {
    fn frames(self) -> (Frame, Frame) {
        match self {
            FlowDirection::Forward => (Frame::Zero, Frame::One),
            FlowDirection::Backward => (Frame::One, Frame::Zero),
        }
    }
}

/// Destination scanline `y1` of content at `y0` exposed at `tau_src`, moving
/// at vertical velocity `vy`: the fixed point of
/// `y1 = y0 + vy * (tau_dst(y1) - tau_src)`, by damped iteration.
/// `None` if the iteration does not settle within tolerance.
pub fn solve_scanline(
    spec: &ShutterSpec,
    dst: Frame,
    y0: f64,
    tau_src: f64,
    vy: f64,
) -> Option<f64> {
    let g = |y: f64| y0 + vy * (spec.time_at(dst, y) - tau_src);
    let mut y = y0;
    for _ in 0..SOLVER_MAX_ITERATIONS {
        let step = g(y) - y;
        if step.abs() < SOLVER_TOLERANCE * 1e-3 {
            return Some(y);
        }
        y += SOLVER_RELAXATION * step;
    }
    ((g(y) - y).abs() < SOLVER_TOLERANCE).then_some(y)
}

/// Closed form of [`solve_scanline`] for constant velocity:
/// `y1 (1 - vy*gamma/h) = y0 + vy * (offset_dst - gamma/2 - tau_src)`.
pub fn closed_form_scanline(spec: &ShutterSpec, dst: Frame, y0: f64, tau_src: f64, vy: f64) -> f64 {
    let h = spec.h() as f64;
    let g = spec.gamma();
    (y0 + vy * (dst.offset() - g / 2.0 - tau_src)) / (1.0 - vy * g / h)
}

pub fn render_gs(scene: &SceneSpec, t: f64) -> Result<ImageBuffer> {
    Ok(PreparedScene::new(scene)?.render_gs(t))
}

pub fn render_rs(scene: &SceneSpec, spec: &ShutterSpec, frame: Frame) -> Result<ImageBuffer> {
    PreparedScene::new(scene)?.render_rs(spec, frame)
}

pub fn gt_flow(
    scene: &SceneSpec,
    spec: &ShutterSpec,
    direction: FlowDirection,
) -> Result<FlowField> {
    PreparedScene::new(scene)?.gt_flow(spec, direction)
}

/// File name of the ground-truth frame for time `t`.
pub fn gt_file_name(t: f64) -> String {
    format!("gt_{t:.3}.png")
}

/// Renders the two rolling-shutter frames, both ground-truth flows and a
/// global-shutter frame per requested time into `out_dir`, then writes
/// `manifest.json` listing every file with its SHA-256.
pub fn emit_dataset(
    scene: &SceneSpec,
    spec: &ShutterSpec,
    times: &[f64],
    out_dir: &Path,
) -> Result<Manifest> {
    for &t in times {
        if !t.is_finite() {
            return Err(Error::Invalid(format!("non-finite time {t}")));
        }
    }
    let prepared = PreparedScene::new(scene)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut files = Vec::new();
    let mut put = |name: String, role: &str, t: Option<f64>, bytes: Vec<u8>| -> Result<()> {
        io::write_bytes(&out_dir.join(&name), &bytes)?;
        files.push(ManifestFile::new(name, role, t, &bytes));
        Ok(())
    };
    let png = |img: &ImageBuffer| io::image::encode_image(img, true).map_err(Error::Invalid);

    put(
        "rs0.png".into(),
        "rs0",
        None,
        png(&prepared.render_rs(spec, Frame::Zero)?)?,
    )?;
    put(
        "rs1.png".into(),
        "rs1",
        None,
        png(&prepared.render_rs(spec, Frame::One)?)?,
    )?;
    put(
        "flow_01.flo".into(),
        "flow_01",
        None,
        io::encode_flo(&prepared.gt_flow(spec, FlowDirection::Forward)?),
    )?;
    put(
        "flow_10.flo".into(),
        "flow_10",
        None,
        io::encode_flo(&prepared.gt_flow(spec, FlowDirection::Backward)?),
    )?;
    for &t in times {
        put(gt_file_name(t), "gt", Some(t), png(&prepared.render_gs(t))?)?;
    }

    let manifest = Manifest::new(scene, spec, times.to_vec(), files);
    io::write_manifest(&manifest, out_dir.join(Manifest::FILE_NAME))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_scene(v: [f64; 2]) -> SceneSpec {
        SceneSpec {
            width: 32,
            height: 32,
            texture: Texture::ValueNoise {
                seed: 11,
                scale: 6.0,
            },
            motion: MotionModel {
                background_velocity: v,
                sprite: None,
            },
            supersample: 2,
        }
    }

    #[test]
    fn lattice_is_deterministic_and_spread() {
        assert_eq!(lattice_value(5, -3, 7), lattice_value(5, -3, 7));
        assert_ne!(lattice_value(5, -3, 7), lattice_value(6, -3, 7));
        let vals: Vec<f64> = (0..400).map(|i| lattice_value(1, i % 20, i / 20)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(vals.iter().all(|v| (0.0..1.0).contains(v)));
        assert!((mean - 0.5).abs() < 0.06, "mean {mean}");
    }

    #[test]
    fn gs_at_zero_is_reference_texture() {
        let scene = SceneSpec {
            supersample: 1,
            ..noise_scene([5.0, 3.0])
        };
        let img = render_gs(&scene, 0.0).unwrap();
        assert_eq!(img.get(3, 4, 0), value_noise(11, 6.0, 3.0, 4.0) as f32);
    }

    #[test]
    fn static_scene_is_time_invariant() {
        let p = PreparedScene::new(&noise_scene([0.0, 0.0])).unwrap();
        let spec = ShutterSpec::new(32, 1.0).unwrap();
        let a = p.render_gs(0.0);
        assert_eq!(a, p.render_gs(0.73));
        assert_eq!(a, p.render_rs(&spec, Frame::One).unwrap());
        let f = p.gt_flow(&spec, FlowDirection::Forward).unwrap();
        assert!(f.data().iter().all(|d| *d == [0.0, 0.0]));
    }

    #[test]
    fn horizontal_motion_gives_constant_flow() {
        let spec = ShutterSpec::new(32, 1.0).unwrap();
        let f = gt_flow(&noise_scene([7.5, 0.0]), &spec, FlowDirection::Forward).unwrap();
        assert!(f.data().iter().all(|d| *d == [7.5, 0.0]));
        let b = gt_flow(&noise_scene([7.5, 0.0]), &spec, FlowDirection::Backward).unwrap();
        assert!(b.data().iter().all(|d| *d == [-7.5, 0.0]));
    }

    #[test]
    fn scanline_solver_matches_closed_form() {
        let spec = ShutterSpec::new(256, 1.0).unwrap();
        // y1 = 128 + 8 (1 + (y1 - 128)/256)  =>  y1 = 132 / (1 - 1/32)
        let y1 = solve_scanline(&spec, Frame::One, 128.0, 0.0, 8.0).unwrap();
        assert!((y1 - 132.0 * 32.0 / 31.0).abs() < 1e-4);
        for &(y0, vy, g) in &[
            (0.0, 8.0, 1.0),
            (255.0, -40.0, 1.0),
            (17.0, 100.0, 0.5),
            (200.0, -127.0, 0.9),
        ] {
            let s = ShutterSpec::new(256, g).unwrap();
            let tau = s.time_at(Frame::Zero, y0);
            let it = solve_scanline(&s, Frame::One, y0, tau, vy).unwrap();
            let cf = closed_form_scanline(&s, Frame::One, y0, tau, vy);
            assert!((it - cf).abs() < 1e-4, "{y0} {vy} {g}: {it} vs {cf}");
        }
    }

    #[test]
    fn validation() {
        let mut s = noise_scene([0.0, 16.0]);
        assert!(s.validate().is_err());
        s.motion.background_velocity = [0.0, 15.9];
        assert!(s.validate().is_ok());
        s.supersample = 5;
        assert!(s.validate().is_err());
        s.supersample = 1;
        s.width = 7;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sprite_is_composited_and_moves() {
        let mut scene = noise_scene([0.0, 0.0]);
        scene.supersample = 1;
        scene.motion.sprite = Some(Sprite {
            rect: Rect {
                x: 4.0,
                y: 4.0,
                width: 8.0,
                height: 8.0,
            },
            velocity: [10.0, 0.0],
            texture: Texture::Checkerboard { period: 100.0 },
        });
        let p = PreparedScene::new(&scene).unwrap();
        let a = p.render_gs(0.0);
        assert_eq!(a.get(5, 5, 0), CHECKER_DARK as f32);
        let b = p.render_gs(1.0);
        assert_eq!(b.get(15, 5, 0), CHECKER_DARK as f32);
        assert_eq!(b.get(5, 5, 0), value_noise(11, 6.0, 5.0, 5.0) as f32);
        let spec = ShutterSpec::new(32, 1.0).unwrap();
        let f = p.gt_flow(&spec, FlowDirection::Forward).unwrap();
        // Row 8 is exposed at t = -0.25: sprite spans x in [1.5, 9.5).
        assert_eq!(f.get(5, 8), [10.0, 0.0]);
        assert_eq!(f.get(20, 8), [0.0, 0.0]);
    }
}
