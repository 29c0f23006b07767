#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rsgs::bmf::BmfMode;
use rsgs::metrics::psnr;
use rsgs::shutter::{Frame, ShutterSpec};
use rsgs::simulator::{
    FlowDirection, MotionModel, PreparedScene, Rect, SceneSpec, Sprite, Texture,
};
use rsgs::synthesis::{reconstruct, ReconstructionConfig, ReconstructionResult};
use rsgs::{FlowField, ImageBuffer};

pub const BENCH_SIZE: usize = 256;

/// Value noise blended with a checkerboard.
pub fn bench_texture() -> Texture {
    Texture::NoiseChecker {
        period: 32.0,
        seed: 7,
        scale: 12.0,
        checker_weight: 0.25,
    }
}

pub fn bench_scene(velocity: [f64; 2]) -> SceneSpec {
    SceneSpec {
        width: BENCH_SIZE,
        height: BENCH_SIZE,
        texture: bench_texture(),
        motion: MotionModel {
            background_velocity: velocity,
            sprite: None,
        },
        supersample: 2,
    }
}

/// Small scene with a moving sprite.
pub fn sprite_scene(size: usize, velocity: [f64; 2]) -> SceneSpec {
    SceneSpec {
        width: size,
        height: size,
        texture: Texture::ValueNoise {
            seed: 3,
            scale: 9.0,
        },
        motion: MotionModel {
            background_velocity: velocity,
            sprite: Some(Sprite {
                rect: Rect {
                    x: size as f64 / 4.0,
                    y: size as f64 / 3.0,
                    width: size as f64 / 4.0,
                    height: size as f64 / 5.0,
                },
                velocity: [-3.0, 1.5],
                texture: Texture::Checkerboard { period: 4.0 },
            }),
        },
        supersample: 2,
    }
}

pub struct Bench {
    pub scene: SceneSpec,
    pub spec: ShutterSpec,
    pub prepared: PreparedScene,
    pub rs0: ImageBuffer,
    pub rs1: ImageBuffer,
    pub f01: FlowField,
    pub f10: FlowField,
}

impl Bench {
    pub fn new(scene: SceneSpec) -> Self {
        let spec = ShutterSpec::full_readout(scene.height).unwrap();
        let prepared = PreparedScene::new(&scene).unwrap();
        Bench {
            rs0: prepared.render_rs(&spec, Frame::Zero).unwrap(),
            rs1: prepared.render_rs(&spec, Frame::One).unwrap(),
            f01: prepared.gt_flow(&spec, FlowDirection::Forward).unwrap(),
            f10: prepared.gt_flow(&spec, FlowDirection::Backward).unwrap(),
            scene,
            spec,
            prepared,
        }
    }

    pub fn reconstruct(&self, mode: BmfMode, t: f64) -> ReconstructionResult {
        let mut cfg = ReconstructionConfig::default();
        cfg.bmf.mode = mode;
        reconstruct(
            &self.rs0, &self.rs1, &self.f01, &self.f10, t, &self.spec, &cfg,
        )
        .unwrap()
    }

    /// Masked PSNR of a reconstruction against the rendered global-shutter
    /// frame, counting only non-hole pixels.
    pub fn masked_psnr(&self, r: &ReconstructionResult) -> f64 {
        psnr(
            &r.frame,
            &self.prepared.render_gs(r.t),
            Some(&r.valid_mask()),
        )
        .unwrap()
    }
}

pub fn rsgs_bin() -> &'static str {
    env!("CARGO_BIN_EXE_rsgs")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(rsgs_bin())
        .args(args)
        .output()
        .expect("spawn rsgs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// `reconstruct` arguments for a dataset written by the simulator.
pub fn dataset_inputs(dir: &Path) -> Vec<String> {
    let f = |n: &str| dir.join(n).to_str().unwrap().to_string();
    vec![
        "--rs0".into(),
        f("rs0.png"),
        "--rs1".into(),
        f("rs1.png"),
        "--flow01".into(),
        f("flow_01.flo"),
        "--flow10".into(),
        f("flow_10.flo"),
    ]
}
