//! File encodings: 8-bit images, Middlebury `.flo` flow, scene specifications,
//! JSON metric reports and dataset manifests.

pub mod flo;
pub mod image;
pub mod manifest;
pub mod report;
pub mod scene;

pub use self::flo::{decode_flo, encode_flo, read_flo, write_flo};
pub use self::image::{decode_image, encode_image, read_image, write_image};
pub use self::manifest::{read_manifest, write_manifest, Manifest, ManifestFile};
pub use self::report::{to_report_string, write_report, FrameMetrics, MetricsReport};
pub use self::scene::{format_scene_spec, parse_scene_spec, read_scene_spec, write_scene_spec};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
