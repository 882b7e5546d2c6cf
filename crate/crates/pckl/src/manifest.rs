use std::path::Path;

use anyhow::{Context, Result};
use pckl_core::solver::hex_digest;
use serde::{Deserialize, Serialize};

use crate::io::write_json;

/// Files whose content depends on the clock; listed but not digested.
pub const UNDIGESTED: [&str; 1] = ["timing.csv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducedFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub output_dir: String,
    pub files: Vec<ProducedFile>,
    pub versions: Versions,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    /// SHA-256 over the digests of every deterministic file, in listed order.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub pckl: String,
    pub pckl_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Self { pckl: env!("CARGO_PKG_VERSION").to_string(), pckl_core: pckl_core::VERSION.to_string() }
    }
}

fn is_digested(path: &str) -> bool {
    !UNDIGESTED.iter().any(|u| path == *u || path.ends_with(&format!("/{u}")))
}

impl RunManifest {
    /// Hashes every listed file under `dir` and writes `manifest.json` there.
    pub fn finish(
        command: &str,
        config_hash: &str,
        dir: &Path,
        files: &[String],
        threads: usize,
        wall_clock_seconds: f64,
    ) -> Result<Self> {
        let mut produced = Vec::with_capacity(files.len());
        let mut all = String::new();
        for f in files {
            let bytes = std::fs::read(dir.join(f)).with_context(|| format!("manifest lists missing file {f}"))?;
            let sha256 = hex_digest(&bytes);
            if is_digested(f) {
                all.push_str(f);
                all.push(' ');
                all.push_str(&sha256);
                all.push('\n');
            }
            produced.push(ProducedFile { path: f.clone(), bytes: bytes.len() as u64, sha256 });
        }
        let m = Self {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            output_dir: dir.display().to_string(),
            files: produced,
            versions: Versions::current(),
            threads,
            wall_clock_seconds,
            digest: hex_digest(all.as_bytes()),
        };
        write_json(&dir.join("manifest.json"), &m)?;
        Ok(m)
    }
}
