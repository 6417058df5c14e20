use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written before any computation starts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path, code: u8) -> CliResult<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path).map_err(|e| CliError::new(code, format!("cannot read {}: {e}", path.display())))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((bytes, digest))
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::new(CliError::OUTPUT, format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn display(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Writes through a temporary file and renames it into place, so a
    /// reader never sees a partial file.
    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let target = self.path(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let fail = |e: std::io::Error| CliError::new(CliError::OUTPUT, format!("cannot write {}: {e}", target.display()));
        fs::write(&tmp, bytes).map_err(fail)?;
        fs::rename(&tmp, &target).map_err(fail)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::new(CliError::OUTPUT, format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}
