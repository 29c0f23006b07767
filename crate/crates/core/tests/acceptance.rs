//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rsgs::bmf::{abmf_correction_maps, retime_bmf, scale_flow_to_bmf, BmfConfig, BmfMode};
use rsgs::io::{decode_flo, encode_flo, format_scene_spec, parse_scene_spec};
use rsgs::metrics::psnr;
use rsgs::shutter::{Frame, ShutterSpec};
use rsgs::simulator::{emit_dataset, MotionModel, PreparedScene, SceneSpec, Texture};
use rsgs::synthesis::{derive_occlusion_masks, fuse, MaskMode};
use rsgs::warp::{forward_splat, SplatConfig, SplatMode};
use rsgs::{FlowField, ImageBuffer, ScalarMap};
use tempfile::tempdir;

use common::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn horizontal_pan() -> Check {
    let bench = Bench::new(bench_scene([40.0, 0.0]));
    let mut parts = Vec::new();
    for t in [0.0, 0.5, 1.0] {
        let start = Instant::now();
        let r = single_thread(|| bench.reconstruct(BmfMode::Abmf, t));
        let elapsed = start.elapsed();
        let p = bench.masked_psnr(&r);
        let holes = r.hole_fraction();
        ensure(p >= 35.0, || format!("t={t}: masked PSNR {p:.2} dB < 35"))?;
        ensure(holes <= 0.05, || {
            format!("t={t}: hole fraction {holes:.4} > 0.05")
        })?;
        ensure(elapsed <= Duration::from_secs(5), || {
            format!("t={t}: took {elapsed:?} > 5 s")
        })?;
        parts.push(format!(
            "t={t}: {p:.2} dB, holes {:.2}%, {:.0} ms",
            100.0 * holes,
            elapsed.as_secs_f64() * 1e3
        ));
    }
    Ok(parts.join("; "))
}

fn naive_margin() -> Check {
    let bench = Bench::new(bench_scene([40.0, 0.0]));
    let r = bench.reconstruct(BmfMode::Abmf, 0.5);
    let gt = bench.prepared.render_gs(0.5);
    let mask = r.valid_mask();
    let ours = psnr(&r.frame, &gt, Some(&mask)).unwrap();
    let naive = psnr(&bench.rs0, &gt, Some(&mask)).unwrap();
    ensure(ours - naive >= 5.0, || {
        format!(
            "margin {:.2} dB < 5 ({ours:.2} vs {naive:.2})",
            ours - naive
        )
    })?;
    Ok(format!(
        "reconstruction {ours:.2} dB vs raw rs0 {naive:.2} dB (+{:.2})",
        ours - naive
    ))
}

fn vertical_pan() -> Check {
    let bench = Bench::new(bench_scene([0.0, 8.0]));
    let geo = bench.masked_psnr(&bench.reconstruct(BmfMode::Geo, 0.5));
    let abmf = bench.masked_psnr(&bench.reconstruct(BmfMode::Abmf, 0.5));
    ensure(geo >= abmf - 0.5, || {
        format!("geo {geo:.2} dB < abmf {abmf:.2} dB - 0.5")
    })?;
    ensure(geo >= 30.0 && abmf >= 30.0, || {
        format!("geo {geo:.2} / abmf {abmf:.2} below 30 dB")
    })?;
    Ok(format!("geo {geo:.2} dB, abmf {abmf:.2} dB"))
}

/// `(t - tau(row)) * F` for frame 0 and `(tau(row) - t) * F` for frame 1,
/// evaluated in double precision.
fn direct_bmf(f: &FlowField, h: usize, frame: Frame, t: f64) -> Vec<[f64; 2]> {
    let w = f.width();
    f.data()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let s = (i / w) as f64;
            let tau = frame.index() as f64 + (s - h as f64 / 2.0) / h as f64;
            let c = match frame {
                Frame::Zero => t - tau,
                Frame::One => tau - t,
            };
            [c * d[0] as f64, c * d[1] as f64]
        })
        .collect()
}

fn guard_ok(h: usize, t: f64, eps: f64) -> bool {
    (0..h).all(|s| {
        let off = (s as f64 - h as f64 / 2.0) / h as f64;
        (t - off).abs() >= eps && (t - 1.0 - off).abs() >= eps
    })
}

fn retiming() -> Check {
    let bench = Bench::new(bench_scene([23.0, 6.0]));
    let h = bench.spec.h();
    let cfg = BmfConfig::default();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    while pairs < 10 {
        let (t1, t2): (f64, f64) = (rng.gen(), rng.gen());
        if !guard_ok(h, t1, cfg.retime_epsilon) {
            continue;
        }
        pairs += 1;
        let (c0, c1) = abmf_correction_maps(&bench.spec, t1, bench.f01.width()).unwrap();
        let u = [
            (
                Frame::Zero,
                scale_flow_to_bmf(&c0, &bench.f01).unwrap(),
                &bench.f01,
            ),
            (
                Frame::One,
                scale_flow_to_bmf(&c1, &bench.f10).unwrap(),
                &bench.f10,
            ),
        ];
        for (frame, u1, f) in u {
            let got =
                retime_bmf(&u1, &bench.spec, frame, t1, t2, &cfg).map_err(|e| e.to_string())?;
            let want = direct_bmf(f, h, frame, t2);
            for (g, w) in got.data().iter().zip(&want) {
                for k in 0..2 {
                    worst = worst.max((g[k] as f64 - w[k]).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-5, || {
        format!("max deviation {worst:.3e} > 1e-5")
    })?;
    Ok(format!("10 pairs, max deviation {worst:.2e}"))
}

fn row_equality() -> Check {
    let scene = sprite_scene(64, [5.0, 3.0]);
    let spec = ShutterSpec::full_readout(64).unwrap();
    let prepared = PreparedScene::new(&scene).unwrap();
    for frame in [Frame::Zero, Frame::One] {
        let rs = prepared.render_rs(&spec, frame).unwrap();
        for s in 0..64 {
            let t = frame.index() as f64 + (s as f64 - 32.0) / 64.0;
            let gs = prepared.render_gs(t);
            let same = rs
                .row(s)
                .iter()
                .zip(gs.row(s))
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("frame {} row {s} differs", frame.index()))?;
        }
    }
    Ok("64 rows x 2 frames bit-identical".into())
}

fn random_image(rng: &mut StdRng, w: usize, h: usize, ch: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, ch, |_, _, _| rng.gen())
}

fn warp_properties() -> Check {
    let mut rng = StdRng::seed_from_u64(6);
    let (w, h) = (40, 35);
    let src = random_image(&mut rng, w, h, 3);
    let z = ScalarMap::from_fn(w, h, |_, _| rng.gen_range(-2048i32..=0) as f32 / 256.0);

    let mut worst_id = 0.0f32;
    for mode in [SplatMode::Sum, SplatMode::Softmax] {
        let cfg = SplatConfig {
            mode,
            ..SplatConfig::default()
        };
        let out = forward_splat(&src, &FlowField::zeros(w, h), &z, &cfg).unwrap();
        for (a, b) in out.image.data().iter().zip(src.data()) {
            worst_id = worst_id.max((a - b).abs());
        }
        for c in out.coverage.data() {
            worst_id = worst_id.max((c - 1.0).abs());
        }
    }
    ensure(worst_id <= 1e-6, || {
        format!("zero-flow identity off by {worst_id:.3e}")
    })?;

    let inside = FlowField::from_fn(w, h, |x, y| {
        [
            rng.gen_range(-(x as f32)..(w - 1 - x) as f32),
            rng.gen_range(-(y as f32)..(h - 1 - y) as f32),
        ]
    });
    let sum_cfg = SplatConfig {
        mode: SplatMode::Sum,
        ..SplatConfig::default()
    };
    let total: f64 = forward_splat(&src, &inside, &z, &sum_cfg)
        .unwrap()
        .coverage
        .data()
        .iter()
        .map(|&c| c as f64)
        .sum();
    let mass_err = (total - (w * h) as f64).abs();
    ensure(mass_err <= 1e-3, || {
        format!("total coverage {total} vs {}", w * h)
    })?;

    let flow = FlowField::from_fn(w, h, |_, _| {
        [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]
    });
    let soft = SplatConfig::default();
    let base = forward_splat(&src, &flow, &z, &soft).unwrap();
    let mut worst_shift = 0.0f32;
    for c in [-37.0f32, 12.5, 400.0] {
        let shifted = ScalarMap::from_fn(w, h, |x, y| z.get(x, y) + c);
        let out = forward_splat(&src, &flow, &shifted, &soft).unwrap();
        for (a, b) in out.image.data().iter().zip(base.image.data()) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    ensure(worst_shift <= 1e-6, || {
        format!("softmax shift changed output by {worst_shift:.3e}")
    })?;
    Ok(format!(
        "identity {worst_id:.1e}, coverage error {mass_err:.1e}, shift {worst_shift:.1e}"
    ))
}

fn fusion() -> Check {
    let px = |v: f32| ImageBuffer::filled(1, 1, 1, v);
    let m = |v: f32| ScalarMap::filled(1, 1, v);
    let eps = 1e-4f32;
    let value = |i0: f32, i1: f32, o0: f32, o1: f32, t: f64| {
        fuse(&px(i0), &px(i1), &m(o0), &m(o1), t, eps)
            .unwrap()
            .image
            .get(0, 0, 0)
    };
    let cases: [(&str, f32, f32); 4] = [
        ("single source", value(0.3, 0.9, 1.0, 0.0, 0.4), 0.3),
        ("equal candidates", value(0.6, 0.6, 0.7, 0.3, 0.8), 0.6),
        ("t weighting", value(0.2, 0.8, 0.5, 0.5, 0.25), 0.35),
        ("t and masks", value(0.2, 0.8, 0.25, 0.75, 0.5), 0.65),
    ];
    for (name, got, want) in cases {
        ensure((got - want).abs() <= 1e-6, || {
            format!("{name}: {got} vs {want}")
        })?;
    }

    let mut rng = StdRng::seed_from_u64(7);
    let cov0 = ScalarMap::from_fn(64, 64, |_, _| {
        if rng.gen_bool(0.1) {
            0.0
        } else {
            rng.gen_range(0.0..3.0)
        }
    });
    let cov1 = ScalarMap::from_fn(64, 64, |_, _| {
        if rng.gen_bool(0.1) {
            0.0
        } else {
            rng.gen_range(0.0..3.0)
        }
    });
    let (o0, o1) = derive_occlusion_masks(&cov0, &cov1, MaskMode::Complement, eps).unwrap();
    let exact = o0.data().iter().zip(o1.data()).all(|(a, b)| a + b == 1.0);
    ensure(exact, || "complement masks do not sum to 1".into())?;

    let below = f32::from_bits(eps.to_bits() - 1);
    let hole = |o: f32| {
        fuse(&px(0.5), &px(0.5), &m(o), &m(o), 0.5, eps)
            .unwrap()
            .hole_mask
            .get(0, 0)
    };
    ensure(hole(eps) == 0.0, || {
        "weight equal to epsilon flagged as hole".into()
    })?;
    ensure(hole(below) == 1.0, || {
        "weight just below epsilon not flagged".into()
    })?;
    Ok("hand values, exact complement, hole threshold".into())
}

fn determinism() -> Check {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data");
    let bench = bench_scene([40.0, 0.0]);
    emit_dataset(
        &bench,
        &ShutterSpec::full_readout(256).unwrap(),
        &[0.5],
        &data,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (run, threads) in [1, 4, 8, 8].into_iter().enumerate() {
        let out = dir.path().join(format!("out_{run}.png"));
        let mut args = dataset_inputs(&data);
        args.extend(
            [
                "--t",
                "0.5",
                "--threads",
                &threads.to_string(),
                "--out",
                path_str(&out),
            ]
            .map(String::from),
        );
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = run_cli(&[&["reconstruct"], &args[..]].concat());
        ensure(o.status.success(), || {
            String::from_utf8_lossy(&o.stderr).into_owned()
        })?;
        outputs.push(std::fs::read(&out).unwrap());
    }
    ensure(outputs.windows(2).all(|p| p[0] == p[1]), || {
        "outputs differ".into()
    })?;
    Ok("threads 1, 4, 8 and a repeat run byte-identical".into())
}

fn round_trips() -> Check {
    let fixture: [u8; 20] = [
        0x50, 0x49, 0x45, 0x48, 1, 0, 0, 0, 1, 0, 0, 0, 0x00, 0x00, 0x60, 0x40, 0x00, 0x00, 0x00,
        0xc0,
    ];
    let one = FlowField::constant(1, 1, [3.5, -2.0]);
    ensure(encode_flo(&one) == fixture, || {
        "1x1 encoding differs from fixture".into()
    })?;
    ensure(decode_flo(&fixture).unwrap() == one, || {
        "1x1 fixture decodes wrongly".into()
    })?;

    let mut rng = StdRng::seed_from_u64(9);
    let flow = FlowField::from_fn(17, 9, |_, _| {
        [rng.gen_range(-1e3..1e3), rng.gen::<f32>() * 1e-30]
    });
    let dir = tempdir().unwrap();
    let flo_path = dir.path().join("f.flo");
    rsgs::io::write_flo(&flow, &flo_path).unwrap();
    let back = rsgs::io::read_flo(&flo_path).unwrap();
    let bit_exact = back
        .data()
        .iter()
        .zip(flow.data())
        .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits());
    ensure(bit_exact, || ".flo round trip not bit-exact".into())?;

    for (name, ch) in [("g.png", 1), ("c.png", 3), ("g.pgm", 1), ("c.ppm", 3)] {
        let img = random_image(&mut rng, 13, 7, ch);
        let p = dir.path().join(name);
        rsgs::io::write_image(&img, &p).unwrap();
        let back = rsgs::io::read_image(&p).unwrap();
        let worst = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        ensure(worst <= 1.0 / 510.0 + 1e-7, || {
            format!("{name}: quantization error {worst}")
        })?;
    }

    let scene = SceneSpec {
        width: 48,
        height: 40,
        texture: Texture::NoiseChecker {
            period: 7.25,
            seed: u64::MAX - 12345,
            scale: 0.1 + 0.2,
            checker_weight: 1.0 / 3.0,
        },
        motion: MotionModel {
            background_velocity: [std::f64::consts::PI, -1e-7],
            sprite: sprite_scene(40, [0.0, 0.0]).motion.sprite,
        },
        supersample: 3,
    };
    let spec = ShutterSpec::new(40, 0.7).unwrap();
    let text = format_scene_spec(&scene, &spec);
    let (s2, p2) = parse_scene_spec(&text, "scene.txt".as_ref(), dir.path()).unwrap();
    ensure(s2 == scene && p2 == spec, || {
        "scene spec round trip changed values".into()
    })?;
    Ok(".flo fixture + bit-exact, 4 image formats within 1/510, scene spec exact".into())
}

fn report_mean(path: &std::path::Path) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v["mean"].as_f64().unwrap()
}

fn vertical_statistic() -> Check {
    let dir = tempdir().unwrap();
    let flo = dir.path().join("const.flo");
    rsgs::io::write_flo(&FlowField::constant(32, 256, [2.0, 8.0]), &flo).unwrap();
    let out = dir.path().join("const.json");
    let o = run_cli(&[
        "analyze-flow",
        "--flow",
        path_str(&flo),
        "--height",
        "256",
        "--out",
        path_str(&out),
    ]);
    ensure(o.status.success(), || {
        String::from_utf8_lossy(&o.stderr).into_owned()
    })?;
    let mean = report_mean(&out);
    let closed = 8.0 / 264.0;
    ensure(
        (mean - 0.030303).abs() <= 1e-6 && (mean - closed).abs() <= 1e-6,
        || format!("constant field mean {mean}"),
    )?;

    let bench = Bench::new(bench_scene([40.0, 0.0]));
    let pan = dir.path().join("pan.flo");
    rsgs::io::write_flo(&bench.f01, &pan).unwrap();
    let pan_out = dir.path().join("pan.json");
    let o = run_cli(&[
        "analyze-flow",
        "--flow",
        path_str(&pan),
        "--height",
        "256",
        "--out",
        path_str(&pan_out),
    ]);
    ensure(o.status.success(), || {
        String::from_utf8_lossy(&o.stderr).into_owned()
    })?;
    let pan_mean = report_mean(&pan_out);
    ensure(pan_mean <= 0.01, || {
        format!("pan mean ratio {pan_mean} > 0.01")
    })?;
    Ok(format!("constant field {mean}, pan benchmark {pan_mean}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("horizontal-pan benchmark", horizontal_pan),
        ("correction vs naive margin", naive_margin),
        ("vertical-motion non-inferiority", vertical_pan),
        ("retiming exactness", retiming),
        ("rolling-shutter row equality", row_equality),
        ("warp identity and conservation", warp_properties),
        ("fusion unit suite", fusion),
        ("determinism across thread counts", determinism),
        ("format round trips", round_trips),
        ("vertical displacement statistic", vertical_statistic),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
