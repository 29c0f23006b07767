//! Command-line front end.
//!
//! Every command writes its artifacts to files, prints a one-line summary on
//! stdout and reports failures on stderr. Exit codes: 0 success, 1 bad input,
//! 2 internal failure.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bmf::{vertical_ratio_stats, BmfMode};
use crate::error::Error;
use crate::io::{self, FrameMetrics, Manifest, MetricsReport};
use crate::metrics;
use crate::raster::{FlowField, ImageBuffer, ScalarMap};
use crate::shutter::ShutterSpec;
use crate::simulator::{emit_dataset, gt_file_name};
use crate::synthesis::{reconstruct, MaskMode, ReconstructionConfig, ReconstructionResult};

#[derive(Debug, Parser)]
#[command(
    name = "rsgs",
    version,
    about = "Rolling-shutter to global-shutter reconstruction"
)]
pub struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic rolling-shutter dataset with ground truth.
    Simulate(SimulateArgs),
    /// Reconstruct one global-shutter frame.
    Reconstruct(ReconstructArgs),
    /// Reconstruct evenly spaced global-shutter frames.
    Video(VideoArgs),
    /// Score predicted frames against ground truth.
    Evaluate(EvaluateArgs),
    /// Vertical displacement ratio statistics of a flow file.
    AnalyzeFlow(AnalyzeFlowArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated ground-truth times.
    #[arg(long, default_value = "0,0.5,1", value_parser = parse_times)]
    pub times: Times,
}

#[derive(Debug, Clone)]
pub struct Times(pub Vec<f64>);

fn parse_times(s: &str) -> Result<Times, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| format!("invalid time `{p}`"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Times)
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub rs0: PathBuf,
    #[arg(long)]
    pub rs1: PathBuf,
    #[arg(long)]
    pub flow01: PathBuf,
    #[arg(long)]
    pub flow10: PathBuf,
    #[arg(long, default_value = "abmf")]
    pub mode: BmfMode,
    /// Readout time ratio.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value = "complement")]
    pub mask: MaskMode,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write candidates, masks, hole mask and motion fields here.
    #[arg(long)]
    pub dump_intermediates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VideoArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of frames, evenly spaced over [0, 1].
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted image or directory of images.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth image or directory with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Inclusion mask (image or directory); pixels >= 0.5 are scored.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeFlowArgs {
    #[arg(long)]
    pub flow: PathBuf,
    /// Scanline count of the frames the flow belongs to.
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver { .. } => CliError::Internal(e.to_string()),
            e => CliError::User(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}

/// Runs a parsed command line, returning the stdout summary line.
pub fn run(cli: Cli) -> CliResult<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Reconstruct(a) => reconstruct_cmd(&a),
        Command::Video(a) => video(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::AnalyzeFlow(a) => analyze_flow(&a),
    })
}

fn simulate(a: &SimulateArgs) -> CliResult<String> {
    let (scene, spec) = io::read_scene_spec(&a.scene)?;
    let existed = a.out.exists();
    match emit_dataset(&scene, &spec, &a.times.0, &a.out) {
        Ok(m) => Ok(format!(
            "simulate: wrote {} files and {} to {}",
            m.files.len(),
            Manifest::FILE_NAME,
            a.out.display()
        )),
        Err(e) => {
            remove_partial_dataset(&a.out, &a.times.0, existed);
            Err(e.into())
        }
    }
}

fn remove_partial_dataset(dir: &Path, times: &[f64], existed: bool) {
    if !existed {
        let _ = std::fs::remove_dir_all(dir);
        return;
    }
    let mut names: Vec<String> = [
        "rs0.png",
        "rs1.png",
        "flow_01.flo",
        "flow_10.flo",
        Manifest::FILE_NAME,
    ]
    .map(String::from)
    .to_vec();
    names.extend(times.iter().map(|&t| gt_file_name(t)));
    for n in names {
        let _ = std::fs::remove_file(dir.join(n));
    }
}

struct Inputs {
    rs0: ImageBuffer,
    rs1: ImageBuffer,
    f01: FlowField,
    f10: FlowField,
    spec: ShutterSpec,
    cfg: ReconstructionConfig,
}

fn load_inputs(a: &InputArgs) -> CliResult<Inputs> {
    let rs0 = io::read_image(&a.rs0)?;
    let rs1 = io::read_image(&a.rs1)?;
    let f01 = io::read_flo(&a.flow01)?;
    let f10 = io::read_flo(&a.flow10)?;
    let pairs = [
        ("rs0", "rs1", rs1.dims()),
        ("rs0", "flow01", f01.dims()),
        ("rs0", "flow10", f10.dims()),
    ];
    for (p, q, dims) in pairs {
        if dims != rs0.dims() {
            return Err(user(format!(
                "dimension mismatch between {p} ({}x{}) and {q} ({}x{})",
                rs0.width(),
                rs0.height(),
                dims.0,
                dims.1
            )));
        }
    }
    if rs0.channels() != rs1.channels() {
        return Err(user(format!(
            "channel mismatch between rs0 ({}) and rs1 ({})",
            rs0.channels(),
            rs1.channels()
        )));
    }
    let spec = ShutterSpec::new(rs0.height(), a.gamma)?;
    let mut cfg = ReconstructionConfig::default();
    cfg.bmf.mode = a.mode;
    cfg.mask_mode = a.mask;
    Ok(Inputs {
        rs0,
        rs1,
        f01,
        f10,
        spec,
        cfg,
    })
}

fn check_t(t: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(user(format!("t out of [0,1]: {t}")))
    }
}

fn run_reconstruction(inp: &Inputs, t: f64) -> CliResult<ReconstructionResult> {
    Ok(reconstruct(
        &inp.rs0, &inp.rs1, &inp.f01, &inp.f10, t, &inp.spec, &inp.cfg,
    )?)
}

fn reconstruct_cmd(a: &ReconstructArgs) -> CliResult<String> {
    check_t(a.t)?;
    let inp = load_inputs(&a.input)?;
    let r = run_reconstruction(&inp, a.t)?;
    io::write_image(&r.frame, &a.out)?;
    if let Some(dir) = &a.dump_intermediates {
        dump_intermediates(&r, dir)?;
    }
    Ok(format!(
        "reconstruct: t={} mode={} holes={:.4}% -> {}",
        a.t,
        mode_name(a.input.mode),
        100.0 * r.hole_fraction(),
        a.out.display()
    ))
}

fn mode_name(m: BmfMode) -> &'static str {
    match m {
        BmfMode::Abmf => "abmf",
        BmfMode::Geo => "geo",
    }
}

fn dump_intermediates(r: &ReconstructionResult, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for k in 0..2 {
        io::write_image(&r.candidates[k], dir.join(format!("candidate_{k}.png")))?;
        io::write_image(&r.masks[k].to_image(), dir.join(format!("mask_{k}.png")))?;
        let cov = normalized(&r.coverage[k]);
        io::write_image(&cov.to_image(), dir.join(format!("coverage_{k}.png")))?;
        io::write_flo(&r.bmf[k], dir.join(format!("bmf_{k}.flo")))?;
    }
    io::write_image(&r.hole_mask.to_image(), dir.join("holes.png"))?;
    Ok(())
}

/// Coverage scaled into `[0, 1]` by its maximum.
fn normalized(m: &ScalarMap) -> ScalarMap {
    let max = m.data().iter().copied().fold(0.0f32, f32::max);
    let s = if max > 0.0 { 1.0 / max } else { 0.0 };
    ScalarMap::from_fn(m.width(), m.height(), |x, y| m.get(x, y) * s)
}

/// File name of frame `k` of a video at time `t`.
pub fn video_frame_name(k: usize, t: f64) -> String {
    format!("gs_{k}_{t:.3}.png")
}

#[derive(Debug, Serialize)]
struct VideoFrame {
    index: usize,
    t: f64,
    name: String,
    hole_fraction: f64,
}

#[derive(Debug, Serialize)]
struct VideoReport {
    frames: Vec<VideoFrame>,
}

fn video(a: &VideoArgs) -> CliResult<String> {
    if a.steps < 2 {
        return Err(user(format!("--steps must be at least 2, got {}", a.steps)));
    }
    let inp = load_inputs(&a.input)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut frames = Vec::with_capacity(a.steps);
    for k in 0..a.steps {
        let t = k as f64 / (a.steps - 1) as f64;
        let r = run_reconstruction(&inp, t)?;
        let name = video_frame_name(k, t);
        io::write_image(&r.frame, a.out.join(&name))?;
        frames.push(VideoFrame {
            index: k,
            t,
            name,
            hole_fraction: r.hole_fraction(),
        });
    }
    let mean_holes = frames.iter().map(|f| f.hole_fraction).sum::<f64>() / frames.len() as f64;
    io::write_report(&VideoReport { frames }, a.out.join("report.json"))?;
    Ok(format!(
        "video: {} frames, mean holes {:.4}% -> {}",
        a.steps,
        100.0 * mean_holes,
        a.out.display()
    ))
}

fn is_image_file(p: &Path) -> bool {
    p.is_file()
        && p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
            ["png", "pgm", "ppm", "pnm"].contains(&e.to_ascii_lowercase().as_str())
        })
}

fn list_images(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_image_file(&p) {
            if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                out.insert(name.to_string(), p.clone());
            }
        }
    }
    Ok(out)
}

/// Time encoded as the last `_`-separated token of a file stem, if any.
pub fn time_from_name(name: &str) -> Option<f64> {
    let stem = Path::new(name).file_stem()?.to_str()?;
    let (_, tail) = stem.rsplit_once('_')?;
    tail.parse::<f64>().ok().filter(|t| t.is_finite())
}

fn score(name: &str, pred: &Path, gt: &Path, mask: Option<&Path>) -> CliResult<FrameMetrics> {
    let p = io::read_image(pred)?;
    let g = io::read_image(gt)?;
    if p.dims() != g.dims() || p.channels() != g.channels() {
        return Err(user(format!(
            "{name}: prediction is {}x{}x{}, ground truth is {}x{}x{}",
            p.width(),
            p.height(),
            p.channels(),
            g.width(),
            g.height(),
            g.channels()
        )));
    }
    let mask = match mask {
        Some(m) => {
            let img = io::read_image(m)?.to_gray();
            if img.dims() != p.dims() {
                return Err(user(format!(
                    "{name}: mask is {}x{}, images are {}x{}",
                    img.width(),
                    img.height(),
                    p.width(),
                    p.height()
                )));
            }
            Some(img)
        }
        None => None,
    };
    let mse = metrics::mse(&p, &g, None)?;
    let mse_masked = metrics::mse(&p, &g, mask.as_ref())?;
    let excluded = mask.as_ref().map_or(0.0, |m| {
        m.data().iter().filter(|&&v| v < 0.5).count() as f64 / m.data().len() as f64
    });
    Ok(FrameMetrics {
        t: time_from_name(name),
        name: name.to_string(),
        psnr_db: metrics::psnr_from_mse(mse),
        psnr_masked_db: metrics::psnr_from_mse(mse_masked),
        mse,
        mse_masked,
        ssim: metrics::ssim(&p, &g)?,
        l1: metrics::l1_loss(&p, &g, mask.as_ref())?,
        hole_fraction: excluded,
    })
}

fn evaluate(a: &EvaluateArgs) -> CliResult<String> {
    let entries = if a.pred.is_dir() {
        if !a.gt.is_dir() {
            return Err(user(format!(
                "{} is a directory but {} is not",
                a.pred.display(),
                a.gt.display()
            )));
        }
        let preds = list_images(&a.pred)?;
        let gts = list_images(&a.gt)?;
        let masks = match &a.mask {
            Some(m) if m.is_dir() => Some(list_images(m)?),
            _ => None,
        };
        let mut unmatched: Vec<String> = preds
            .keys()
            .filter(|n| !gts.contains_key(*n))
            .map(|n| format!("{} (no ground truth)", a.pred.join(n).display()))
            .collect();
        unmatched.extend(
            gts.keys()
                .filter(|n| !preds.contains_key(*n))
                .map(|n| format!("{} (no prediction)", a.gt.join(n).display())),
        );
        if let Some(ms) = &masks {
            unmatched.extend(
                preds
                    .keys()
                    .filter(|n| !ms.contains_key(*n))
                    .map(|n| format!("{} (no mask)", a.pred.join(n).display())),
            );
        }
        if !unmatched.is_empty() {
            return Err(user(format!(
                "unmatched files:\n  {}",
                unmatched.join("\n  ")
            )));
        }
        if preds.is_empty() {
            return Err(user(format!("no images in {}", a.pred.display())));
        }
        let mut entries = Vec::with_capacity(preds.len());
        for (name, p) in &preds {
            let mask = match (&masks, &a.mask) {
                (Some(ms), _) => Some(ms[name].as_path()),
                (None, m) => m.as_deref(),
            };
            entries.push(score(name, p, &gts[name], mask)?);
        }
        entries
    } else {
        let name = a
            .pred
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        vec![score(&name, &a.pred, &a.gt, a.mask.as_deref())?]
    };
    let report = MetricsReport::new(entries);
    io::write_report(&report, &a.out)?;
    let mean = report.mean.as_ref().expect("non-empty report");
    Ok(format!(
        "evaluate: {} frames, psnr {:.3} dB, masked psnr {:.3} dB, ssim {:.4} -> {}",
        report.entries.len(),
        mean.psnr_db,
        mean.psnr_masked_db,
        mean.ssim,
        a.out.display()
    ))
}

#[derive(Debug, Serialize)]
struct FlowReport {
    height: usize,
    mean: f64,
    std: f64,
    max: f64,
}

fn analyze_flow(a: &AnalyzeFlowArgs) -> CliResult<String> {
    let f = io::read_flo(&a.flow)?;
    if a.height < 2 {
        return Err(user(format!(
            "--height must be at least 2, got {}",
            a.height
        )));
    }
    let s = vertical_ratio_stats(&f, a.height)?;
    io::write_report(
        &FlowReport {
            height: a.height,
            mean: s.mean,
            std: s.std,
            max: s.max,
        },
        &a.out,
    )?;
    Ok(format!(
        "analyze-flow: mean {:.6} std {:.6} max {:.6} -> {}",
        s.mean,
        s.std,
        s.max,
        a.out.display()
    ))
}
