use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Seeds;
use crate::error::{Error, Result};
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub config: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub notes: Vec<String>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::format(path, e))
    }
}

/// Forward-slash path, relative to `base` when `path` lies under it.
pub fn display_path(path: &Path, base: &Path) -> String {
    let p = path.strip_prefix(base).unwrap_or(path);
    p.to_string_lossy().replace('\\', "/")
}

/// Schema tag of a run artifact, from its file name.
pub fn schema_for(rel: &Path) -> Option<String> {
    let name = rel.file_name()?.to_str()?;
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let family = if rel.starts_with("sessions") {
        "sessions"
    } else {
        stem
    };
    Some(format!("evgrid.{family}/{SCHEMA_VERSION}"))
}

/// Output files collected during a run, keyed by path relative to the run directory.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Artifacts {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(rel.into(), bytes);
    }

    /// Writes every file and returns their digests in path order.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<FileDigest>> {
        let mut digests = Vec::with_capacity(self.files.len());
        for (rel, bytes) in &self.files {
            io::write_file(&out_dir.join(rel), bytes)?;
            digests.push(FileDigest {
                path: display_path(rel, Path::new("")),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
                schema: schema_for(rel),
            });
        }
        Ok(digests)
    }
}
