//! Rolling-shutter to global-shutter video reconstruction.
//!
//! Given two consecutive rolling-shutter frames and their bidirectional
//! optical flow, [`synthesis::reconstruct`] renders the distortion-free
//! global-shutter frame at any time `t` in `[0, 1]`: per-pixel correction maps
//! scale the flows into bilateral motion fields ([`bmf`]), both frames are
//! forward-splatted to time `t` ([`warp`]) and the candidates are fused with
//! coverage-derived occlusion masks. [`simulator`] renders synthetic
//! rolling-shutter footage with exact ground truth for every stage.

pub mod bmf;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod shutter;
pub mod simulator;
pub mod synthesis;
pub mod warp;

pub use error::{Error, Result};
pub use raster::{bilinear_sample, FlowField, ImageBuffer, ScalarMap};
pub use shutter::{Frame, ShutterSpec};
