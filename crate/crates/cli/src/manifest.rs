//! Run-manifest sidecars.
//!
//! A manifest names the command, its inputs and outputs with content hashes, every resolved
//! setting and a hash of those settings. It holds no timestamps, so identical runs write
//! identical manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Resolver;
use crate::error::{CliError, CliResult};

pub const MANIFEST_SUFFIX: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// `out.grid` gets `out.grid.manifest.txt`; a directory gets `manifest.txt` inside it.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    if artifact.is_dir() {
        artifact.join(MANIFEST_SUFFIX)
    } else {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".");
        name.push(MANIFEST_SUFFIX);
        artifact.with_file_name(name)
    }
}

#[derive(Debug)]
pub struct Manifest {
    command: String,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<(String, PathBuf)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> &mut Self {
        self.inputs.push((role.to_string(), path.to_path_buf()));
        self
    }

    pub fn output(&mut self, role: &str, path: &Path) -> &mut Self {
        self.outputs.push((role.to_string(), path.to_path_buf()));
        self
    }

    pub fn render(&self, config: &Resolver) -> CliResult<String> {
        let settings = config.canonical();
        let mut s = String::new();
        let _ = writeln!(s, "# csdf run manifest");
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "csdf_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "grid_format_version = {}", csdf_core::grid::GRID_VERSION);
        let _ = writeln!(s, "seed = {}", config.resolved.get("seed").map_or("none", |v| v));
        let _ = writeln!(s, "config_hash = {}", sha256_hex(settings.as_bytes()));
        for (role, path) in &self.inputs {
            let hash = if path.is_dir() { "directory".to_string() } else { file_hash(path)? };
            let _ = writeln!(s, "input.{role} = {} sha256:{hash}", path.display());
        }
        for (role, path) in &self.outputs {
            let _ = writeln!(s, "output.{role} = {} sha256:{}", path.display(), file_hash(path)?);
        }
        s.push_str("[config]\n");
        s.push_str(&settings);
        Ok(s)
    }

    /// Writes the manifest next to `artifact`.
    pub fn write(&self, config: &Resolver, artifact: &Path) -> CliResult<PathBuf> {
        let text = self.render(config)?;
        let path = manifest_path(artifact);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(
            manifest_path(Path::new("/tmp/nonexistent/out.grid")),
            Path::new("/tmp/nonexistent/out.grid.manifest.txt")
        );
    }
}
