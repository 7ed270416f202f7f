//! Report files. Every report carries the toolkit version and a hash of the
//! configuration that produced it, and nothing that varies between runs
//! (no timestamps, no absolute paths).

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOLKIT: &str = "artikit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the JSON serialization of `config`, hex encoded.
pub fn config_hash<T: Serialize + ?Sized>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub config_hash: &'a str,
    pub kind: &'a str,
    pub report: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(kind: &'a str, config_hash: &'a str, report: &'a T) -> Self {
        Envelope {
            toolkit: TOOLKIT,
            version: VERSION,
            config_hash,
            kind,
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Prefixes CSV content with `#` comment lines naming the toolkit version
/// and configuration hash.
pub fn csv_with_header(config_hash: &str, csv: &str) -> String {
    format!("# {TOOLKIT} {VERSION}\n# config_hash {config_hash}\n{csv}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.json` (enveloped) and `<stem>.csv` next to each other.
pub fn write_report<T: Serialize>(
    stem: &Path,
    kind: &str,
    config_hash: &str,
    report: &T,
    csv: &str,
) -> Result<()> {
    let json = Envelope::new(kind, config_hash, report).to_json()?;
    write_text(&stem.with_extension("json"), &json)?;
    write_text(&stem.with_extension("csv"), &csv_with_header(config_hash, csv))
}
