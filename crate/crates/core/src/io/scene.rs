//! Scene specification text format.
//!
//! One `key = value` per line, `#` starts a comment. Unknown, duplicate and
//! missing fields are errors reported with the field name and line number.
//!
//! ```text
//! schema_version = 1
//! width = 256
//! height = 256
//! gamma = 1
//! supersample = 2
//! texture = noise_checker
//! texture.period = 32
//! texture.seed = 7
//! texture.scale = 12
//! texture.checker_weight = 0.25
//! velocity = 40 0
//! sprite.rect = 100 80 40 30
//! sprite.velocity = -20 0
//! sprite.texture = checkerboard
//! sprite.texture.period = 5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::shutter::ShutterSpec;
use crate::simulator::{MotionModel, Rect, SceneSpec, Sprite, Texture};

pub const SCHEMA_VERSION: u32 = 1;

pub fn read_scene_spec(path: impl AsRef<Path>) -> Result<(SceneSpec, ShutterSpec)> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text =
        String::from_utf8(bytes).map_err(|_| Error::format(path, "scene spec is not UTF-8"))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scene_spec(&text, path, base)
}

pub fn write_scene_spec(
    scene: &SceneSpec,
    spec: &ShutterSpec,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_bytes(path.as_ref(), format_scene_spec(scene, spec).as_bytes())
}

pub fn format_scene_spec(scene: &SceneSpec, spec: &ShutterSpec) -> String {
    let mut out = String::new();
    for (k, v) in scene_fields(scene, spec) {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

/// Parses scene text. Relative image paths resolve against `base_dir`.
pub fn parse_scene_spec(
    text: &str,
    path: &Path,
    base_dir: &Path,
) -> Result<(SceneSpec, ShutterSpec)> {
    let mut fields = Fields::new(path);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(fields.err(line, content, "expected `key = value`"));
        };
        fields.insert(line, key.trim(), value.trim())?;
    }
    fields.build(base_dir)
}

/// Parses already-split `(key, value)` pairs, e.g. from a dataset manifest.
pub fn scene_from_fields(
    pairs: &BTreeMap<String, String>,
    path: &Path,
    base_dir: &Path,
) -> Result<(SceneSpec, ShutterSpec)> {
    let mut fields = Fields::new(path);
    for (k, v) in pairs {
        fields.insert(0, k, v)?;
    }
    fields.build(base_dir)
}

/// Canonical `(key, value)` list in file order.
pub fn scene_fields(scene: &SceneSpec, spec: &ShutterSpec) -> Vec<(String, String)> {
    let mut out = vec![
        ("schema_version".to_string(), SCHEMA_VERSION.to_string()),
        ("width".into(), scene.width.to_string()),
        ("height".into(), scene.height.to_string()),
        ("gamma".into(), spec.gamma().to_string()),
        ("supersample".into(), scene.supersample.to_string()),
    ];
    texture_fields("texture", &scene.texture, &mut out);
    let [vx, vy] = scene.motion.background_velocity;
    out.push(("velocity".into(), format!("{vx} {vy}")));
    if let Some(s) = &scene.motion.sprite {
        let r = s.rect;
        out.push((
            "sprite.rect".into(),
            format!("{} {} {} {}", r.x, r.y, r.width, r.height),
        ));
        out.push((
            "sprite.velocity".into(),
            format!("{} {}", s.velocity[0], s.velocity[1]),
        ));
        texture_fields("sprite.texture", &s.texture, &mut out);
    }
    out
}

fn texture_fields(prefix: &str, t: &Texture, out: &mut Vec<(String, String)>) {
    out.push((prefix.to_string(), t.kind().to_string()));
    let mut param = |name: &str, v: String| out.push((format!("{prefix}.{name}"), v));
    match t {
        Texture::Checkerboard { period } => param("period", period.to_string()),
        Texture::ValueNoise { seed, scale } => {
            param("seed", seed.to_string());
            param("scale", scale.to_string());
        }
        Texture::NoiseChecker {
            period,
            seed,
            scale,
            checker_weight,
        } => {
            param("period", period.to_string());
            param("seed", seed.to_string());
            param("scale", scale.to_string());
            param("checker_weight", checker_weight.to_string());
        }
        Texture::Image { path } => param("path", path.display().to_string()),
    }
}

struct Fields<'a> {
    path: &'a Path,
    map: BTreeMap<String, (usize, String)>,
}

impl<'a> Fields<'a> {
    fn new(path: &'a Path) -> Self {
        Self {
            path,
            map: BTreeMap::new(),
        }
    }

    fn err(&self, line: usize, field: &str, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        if key.is_empty() {
            return Err(self.err(line, key, "empty field name"));
        }
        if let Some((first, _)) = self.map.get(key) {
            return Err(self.err(
                line,
                key,
                format!("duplicate field (first set on line {first})"),
            ));
        }
        self.map.insert(key.to_string(), (line, value.to_string()));
        Ok(())
    }

    fn take_opt(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take(&mut self, key: &str) -> Result<(usize, String)> {
        self.take_opt(key)
            .ok_or_else(|| self.err(0, key, "missing required field"))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<(usize, T)> {
        let (line, raw) = self.take(key)?;
        let v = raw
            .parse()
            .map_err(|_| self.err(line, key, format!("cannot parse `{raw}`")))?;
        Ok((line, v))
    }

    fn parse_f64(&mut self, key: &str) -> Result<(usize, f64)> {
        let (line, v) = self.parse::<f64>(key)?;
        if !v.is_finite() {
            return Err(self.err(line, key, "value must be finite"));
        }
        Ok((line, v))
    }

    fn parse_vec<const N: usize>(&mut self, key: &str) -> Result<[f64; N]> {
        let (line, raw) = self.take(key)?;
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(line, key, format!("cannot parse `{raw}`")))?;
        let arr: [f64; N] = parts
            .try_into()
            .map_err(|_| self.err(line, key, format!("expected {N} numbers")))?;
        if !arr.iter().all(|v| v.is_finite()) {
            return Err(self.err(line, key, "values must be finite"));
        }
        Ok(arr)
    }

    fn texture(&mut self, prefix: &str, base_dir: &Path) -> Result<Texture> {
        let (line, kind) = self.take(prefix)?;
        let key = |p: &str| format!("{prefix}.{p}");
        let positive = |fields: &Self, name: &str, (l, v): (usize, f64)| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(fields.err(l, &key(name), "must be > 0"))
            }
        };
        let tex = match kind.as_str() {
            "checkerboard" => {
                let p = self.parse_f64(&key("period"))?;
                Texture::Checkerboard {
                    period: positive(self, "period", p)?,
                }
            }
            "value_noise" => {
                let (_, seed) = self.parse::<u64>(&key("seed"))?;
                let s = self.parse_f64(&key("scale"))?;
                Texture::ValueNoise {
                    seed,
                    scale: positive(self, "scale", s)?,
                }
            }
            "noise_checker" => {
                let p = self.parse_f64(&key("period"))?;
                let (_, seed) = self.parse::<u64>(&key("seed"))?;
                let s = self.parse_f64(&key("scale"))?;
                let (wl, weight) = self.parse_f64(&key("checker_weight"))?;
                if !(0.0..=1.0).contains(&weight) {
                    return Err(self.err(wl, &key("checker_weight"), "must be in [0, 1]"));
                }
                Texture::NoiseChecker {
                    period: positive(self, "period", p)?,
                    seed,
                    scale: positive(self, "scale", s)?,
                    checker_weight: weight,
                }
            }
            "image" => {
                let (_, raw) = self.take(&key("path"))?;
                let p = PathBuf::from(raw);
                Texture::Image {
                    path: if p.is_relative() { base_dir.join(p) } else { p },
                }
            }
            other => {
                return Err(self.err(
                    line,
                    prefix,
                    format!("unknown texture `{other}` (expected checkerboard|value_noise|noise_checker|image)"),
                ))
            }
        };
        Ok(tex)
    }

    fn build(mut self, base_dir: &Path) -> Result<(SceneSpec, ShutterSpec)> {
        let (line, version) = self.parse::<u32>("schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(self.err(
                line,
                "schema_version",
                format!("unsupported version {version}"),
            ));
        }
        let (wl, width) = self.parse::<usize>("width")?;
        if width < 8 {
            return Err(self.err(wl, "width", "must be >= 8"));
        }
        let (hl, height) = self.parse::<usize>("height")?;
        if height < 8 {
            return Err(self.err(hl, "height", "must be >= 8"));
        }
        let (gl, gamma) = self.parse::<f64>("gamma")?;
        let spec =
            ShutterSpec::new(height, gamma).map_err(|e| self.err(gl, "gamma", e.to_string()))?;
        let (sl, supersample) = self.parse::<u32>("supersample")?;
        if !(1..=4).contains(&supersample) {
            return Err(self.err(sl, "supersample", "must be in [1, 4]"));
        }
        let texture = self.texture("texture", base_dir)?;
        let velocity = self.parse_vec::<2>("velocity")?;
        let sprite = match self.take_opt("sprite.rect") {
            None => None,
            Some((line, raw)) => {
                self.map.insert("sprite.rect".into(), (line, raw));
                let r = self.parse_vec::<4>("sprite.rect")?;
                let v = self.parse_vec::<2>("sprite.velocity")?;
                let texture = self.texture("sprite.texture", base_dir)?;
                Some(Sprite {
                    rect: Rect {
                        x: r[0],
                        y: r[1],
                        width: r[2],
                        height: r[3],
                    },
                    velocity: v,
                    texture,
                })
            }
        };
        if let Some((key, (line, _))) = self.map.iter().next() {
            return Err(self.err(*line, key, "unknown field"));
        }
        let scene = SceneSpec {
            width,
            height,
            texture,
            motion: MotionModel {
                background_velocity: velocity,
                sprite,
            },
            supersample,
        };
        scene
            .validate()
            .map_err(|e| self.err(0, "scene", e.to_string()))?;
        Ok((scene, spec))
    }
}
