//! JSON reports. Keys follow struct declaration order and every float is
//! written with 6 significant digits, so identical inputs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::write_bytes;
use crate::error::{Error, Result};

/// Metrics of one evaluated frame.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct FrameMetrics {
    /// Target time, when known.
    pub t: Option<f64>,
    pub name: String,
    pub psnr_db: f64,
    pub psnr_masked_db: f64,
    pub mse: f64,
    pub mse_masked: f64,
    pub ssim: f64,
    pub l1: f64,
    pub hole_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<FrameMetrics>,
    /// Per-field mean over `entries`; absent when there are none.
    pub mean: Option<FrameMetrics>,
}

impl MetricsReport {
    pub fn new(entries: Vec<FrameMetrics>) -> Self {
        let mean = (!entries.is_empty()).then(|| {
            let n = entries.len() as f64;
            let avg = |f: fn(&FrameMetrics) -> f64| entries.iter().map(f).sum::<f64>() / n;
            FrameMetrics {
                t: None,
                name: "mean".into(),
                psnr_db: avg(|e| e.psnr_db),
                psnr_masked_db: avg(|e| e.psnr_masked_db),
                mse: avg(|e| e.mse),
                mse_masked: avg(|e| e.mse_masked),
                ssim: avg(|e| e.ssim),
                l1: avg(|e| e.l1),
                hole_fraction: avg(|e| e.hole_fraction),
            }
        });
        Self { entries, mean }
    }
}

/// Formats a float like C's `%.6g`, as a valid JSON number.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Sig6Formatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident $(, $arg:ident : $ty:ty)*;)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for Sig6Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format_sig6(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        writer.write_all(format_sig6(value as f64).as_bytes())
    }

    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        begin_object_value;
        end_object_value;
    }
}

pub fn to_report_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, Sig6Formatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("utf-8 json")
}

pub fn write_report<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_bytes(path, to_report_string(value).as_bytes())
}
