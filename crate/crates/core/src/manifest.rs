//! JSON-lines corpus manifests.
//!
//! One JSON object per line, in recording order:
//!
//! ```text
//! {"id":"u001","speaker":"s1","corpus":"toy","audio":"wav/u001.wav",
//!  "articulatory":"ema/u001.afv","unavailable":["Vx","Vy"],
//!  "intervals":[{"onset":0.0,"offset":0.31,"label":"sil"}, ...]}
//! ```
//!
//! Paths are relative to the manifest's directory (absolute paths are kept
//! as is). `audio` is a WAV file, `acoustic` and `articulatory` are AFV1
//! files. Line order is the recording order used by rolling normalization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{validate_intervals, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub speaker: String,
    pub corpus: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acoustic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub articulatory: Option<String>,
    /// Channels present in the articulatory file that must not be used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unavailable: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<Interval>>,
    /// Time in the source recording of the first frame, set when silence
    /// trimming removed a leading span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_s: Option<f64>,
}

impl ManifestEntry {
    pub fn new(id: impl Into<String>, speaker: impl Into<String>, corpus: impl Into<String>) -> Self {
        ManifestEntry {
            id: id.into(),
            speaker: speaker.into(),
            corpus: corpus.into(),
            audio: None,
            acoustic: None,
            articulatory: None,
            unavailable: Vec::new(),
            intervals: None,
            origin_s: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            if !seen.insert(entry.id.clone()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("duplicate utterance id `{}`", entry.id),
                });
            }
            if let Some(iv) = &entry.intervals {
                validate_intervals(iv).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            }
            if entry.audio.is_none() && entry.acoustic.is_none() && entry.articulatory.is_none() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("utterance `{}` references no data file", entry.id),
                });
            }
            entries.push(entry);
        }
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Manifest { entries, base_dir })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_entries(&self.entries, path)
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Entries grouped by speaker, speakers in order of first appearance,
    /// entries in manifest order.
    pub fn by_speaker(&self) -> Vec<(String, Vec<&ManifestEntry>)> {
        let mut groups: Vec<(String, Vec<&ManifestEntry>)> = Vec::new();
        for e in &self.entries {
            match groups.iter_mut().find(|(s, _)| *s == e.speaker) {
                Some((_, v)) => v.push(e),
                None => groups.push((e.speaker.clone(), vec![e])),
            }
        }
        groups
    }
}

pub fn write_entries(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).map_err(|e| Error::Internal(e.to_string()))?;
        out.push(b'\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
