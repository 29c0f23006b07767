//! Dataset manifest (`manifest.json`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scene::{scene_fields, scene_from_fields};
use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::shutter::ShutterSpec;
use crate::simulator::SceneSpec;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShutterFields {
    pub h: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub name: String,
    /// `rs0`, `rs1`, `flow_01`, `flow_10` or `gt`.
    pub role: String,
    pub t: Option<f64>,
    /// Lowercase hex SHA-256 of the file contents.
    pub sha256: String,
}

impl ManifestFile {
    pub fn new(name: String, role: &str, t: Option<f64>, contents: &[u8]) -> Self {
        Self {
            name,
            role: role.to_string(),
            t,
            sha256: sha256_hex(contents),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub shutter: ShutterFields,
    /// Scene specification fields, as in the scene text format.
    pub scene: BTreeMap<String, String>,
    pub times: Vec<f64>,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn new(
        scene: &SceneSpec,
        spec: &ShutterSpec,
        times: Vec<f64>,
        files: Vec<ManifestFile>,
    ) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            shutter: ShutterFields {
                h: spec.h(),
                gamma: spec.gamma(),
            },
            scene: scene_fields(scene, spec).into_iter().collect(),
            times,
            files,
        }
    }

    pub fn scene_spec(&self) -> Result<(SceneSpec, ShutterSpec)> {
        let (scene, spec) =
            scene_from_fields(&self.scene, Path::new(Self::FILE_NAME), Path::new("."))?;
        if spec.h() != self.shutter.h || spec.gamma() != self.shutter.gamma {
            return Err(Error::Invalid(
                "manifest shutter block disagrees with scene fields".into(),
            ));
        }
        Ok((scene, spec))
    }

    pub fn file(&self, role: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.role == role)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serialization");
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let m: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    if m.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported schema version {}", m.schema_version),
        ));
    }
    Ok(m)
}
