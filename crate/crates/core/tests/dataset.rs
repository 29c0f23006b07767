mod common;

use rsgs::io::manifest::sha256_hex;
use rsgs::io::{read_flo, read_image, read_manifest, Manifest};
use rsgs::shutter::{Frame, ShutterSpec};
use rsgs::simulator::{emit_dataset, gt_file_name, FlowDirection, PreparedScene};
use tempfile::tempdir;

use common::*;

#[test]
fn default_times_give_seven_files_and_manifest() {
    let dir = tempdir().unwrap();
    let scene = sprite_scene(40, [4.0, 1.0]);
    let spec = ShutterSpec::full_readout(40).unwrap();
    let m = emit_dataset(&scene, &spec, &[0.0, 0.5, 1.0], dir.path()).unwrap();
    assert_eq!(m.files.len(), 7);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "flow_01.flo",
            "flow_10.flo",
            "gt_0.000.png",
            "gt_0.500.png",
            "gt_1.000.png",
            "manifest.json",
            "rs0.png",
            "rs1.png"
        ]
    );
    for f in &m.files {
        assert_eq!(
            f.sha256,
            sha256_hex(&std::fs::read(dir.path().join(&f.name)).unwrap())
        );
        assert_eq!(f.sha256.len(), 64);
        assert!(f
            .sha256
            .chars()
            .all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c)));
    }
    assert_eq!(m.file("gt").unwrap().t, Some(0.0));
}

#[test]
fn manifest_reproduces_scene_and_shutter() {
    let dir = tempdir().unwrap();
    let scene = sprite_scene(32, [-2.5, 0.75]);
    let spec = ShutterSpec::new(32, 0.8).unwrap();
    let written = emit_dataset(&scene, &spec, &[0.25], dir.path()).unwrap();
    let m = read_manifest(dir.path().join(Manifest::FILE_NAME)).unwrap();
    assert_eq!(m, written);
    let (s2, p2) = m.scene_spec().unwrap();
    assert_eq!(s2, scene);
    assert_eq!(p2, spec);
    assert_eq!(m.times, vec![0.25]);
}

#[test]
fn same_seed_gives_identical_files() {
    let scene = sprite_scene(32, [3.0, -1.0]);
    let spec = ShutterSpec::full_readout(32).unwrap();
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let ma = emit_dataset(&scene, &spec, &[0.0, 0.5, 1.0], a.path()).unwrap();
    let mb = emit_dataset(&scene, &spec, &[0.0, 0.5, 1.0], b.path()).unwrap();
    assert_eq!(ma, mb);
    for f in &ma.files {
        assert_eq!(
            std::fs::read(a.path().join(&f.name)).unwrap(),
            std::fs::read(b.path().join(&f.name)).unwrap()
        );
    }
}

#[test]
fn files_hold_rendered_content() {
    let dir = tempdir().unwrap();
    let scene = bench_scene([40.0, 0.0]);
    let spec = ShutterSpec::full_readout(256).unwrap();
    emit_dataset(&scene, &spec, &[0.5], dir.path()).unwrap();
    let p = PreparedScene::new(&scene).unwrap();
    let rs0 = read_image(dir.path().join("rs0.png")).unwrap();
    let direct = p.render_rs(&spec, Frame::Zero).unwrap();
    let worst = rs0
        .data()
        .iter()
        .zip(direct.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    assert!(worst <= 1.0 / 510.0 + 1e-7);
    assert_eq!(
        read_flo(dir.path().join("flow_10.flo")).unwrap(),
        p.gt_flow(&spec, FlowDirection::Backward).unwrap()
    );
    let f01 = read_flo(dir.path().join("flow_01.flo")).unwrap();
    assert!(f01.data().iter().all(|d| *d == [40.0, 0.0]));
    assert!(dir.path().join(gt_file_name(0.5)).exists());
}

#[test]
fn vertical_pan_flow_matches_closed_form() {
    let scene = bench_scene([0.0, 8.0]);
    let spec = ShutterSpec::full_readout(256).unwrap();
    let p = PreparedScene::new(&scene).unwrap();
    let fwd = p.gt_flow(&spec, FlowDirection::Forward).unwrap();
    let back = p.gt_flow(&spec, FlowDirection::Backward).unwrap();
    // Every row moves by vy / (1 - vy / h).
    let f = 8.0 / (1.0 - 8.0 / 256.0);
    for y in [0, 100, 255] {
        assert!((fwd.get(3, y)[1] as f64 - f).abs() < 1e-4);
        assert!((back.get(3, y)[1] as f64 + f).abs() < 1e-4);
        assert_eq!(fwd.get(3, y)[0], 0.0);
    }
}
