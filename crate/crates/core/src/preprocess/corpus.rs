//! Corpus-level preprocessing driver: manifest in, AFV1 files plus an
//! updated manifest and per-speaker statistics out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{
    normalize_mfcc, presmooth, rolling_normalize, trim_silence, ChannelStats, RollingStats,
    TrimOutcome, DEFAULT_SILENCE_LABELS,
};
use crate::afv::{read_feature_file, write_feature_file};
use crate::error::{Error, Result};
use crate::frames::{FrameSequence, TrajectorySet, UtteranceRecord};
use crate::manifest::{write_entries, Manifest, ManifestEntry};
use crate::signal::{add_deltas, mfcc, resample, stack_context, MfccConfig};
use crate::tract::compute_tract_variables;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelExclusion {
    pub speaker: String,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub name: String,
    /// Required by the `run` pipeline, ignored by `preprocess --manifest`.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Articulatory pre-smoothing cutoff.
    #[serde(default = "default_cutoff")]
    pub cutoff_hz: f64,
    /// Articulatory channels to keep, in order. Channels listed here but
    /// missing from a file are added as unavailable.
    #[serde(default)]
    pub channels: Option<Vec<String>>,
    /// Curated per-speaker channel exclusions.
    #[serde(default)]
    pub exclude: Vec<ChannelExclusion>,
}

fn default_cutoff() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_rate_hz: f64,
    pub filter_taps: usize,
    pub rolling_half_window: usize,
    pub tract_variables: bool,
    pub silence_labels: Vec<String>,
    pub mfcc: MfccConfig,
    #[serde(rename = "corpus")]
    pub corpora: Vec<CorpusConfig>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_rate_hz: 100.0,
            filter_taps: 50,
            rolling_half_window: 60,
            tract_variables: true,
            silence_labels: DEFAULT_SILENCE_LABELS.iter().map(|s| s.to_string()).collect(),
            mfcc: MfccConfig::default(),
            corpora: Vec::new(),
        }
    }
}

impl PreprocessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PreprocessConfig =
            toml::from_str(text).map_err(|e| Error::config("preprocess", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_rate_hz > 0.0) {
            return Err(Error::config("target_rate_hz", "must be positive"));
        }
        if self.filter_taps < 3 {
            return Err(Error::config("filter_taps", "must be at least 3"));
        }
        for (i, c) in self.corpora.iter().enumerate() {
            if !(c.cutoff_hz > 0.0 && c.cutoff_hz < self.target_rate_hz / 2.0) {
                return Err(Error::config(
                    format!("corpus[{i}].cutoff_hz"),
                    format!(
                        "{} Hz must lie in (0, {}) Hz",
                        c.cutoff_hz,
                        self.target_rate_hz / 2.0
                    ),
                ));
            }
            if let Some(ch) = &c.channels {
                for name in ch {
                    name.parse::<crate::frames::Articulator>()
                        .map_err(|e| Error::config(format!("corpus[{i}].channels"), e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    pub fn corpus(&self, name: &str) -> Result<&CorpusConfig> {
        self.corpora
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| {
                Error::config(
                    "corpus",
                    format!("no configuration for corpus `{name}`; add a [[corpus]] table with name = \"{name}\""),
                )
            })
    }
}

/// Everything kept for one speaker after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerStats {
    pub speaker_id: String,
    /// Utterance ids in recording order; indexes `articulatory.rolling_means`.
    pub utterance_ids: Vec<String>,
    pub acoustic: Option<ChannelStats>,
    pub articulatory: Option<RollingStats>,
}

impl SpeakerStats {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn utterance_index(&self, id: &str) -> Option<usize> {
        self.utterance_ids.iter().position(|u| u == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub utterances: usize,
    pub speakers: usize,
    pub zero_radius_frames: usize,
    pub warnings: Vec<String>,
}

pub(crate) fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let raw: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
    }
    .map_err(|e| Error::format(path, e.to_string()))?;
    let mono = raw
        .chunks_exact(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok((mono, spec.sample_rate as f64))
}

struct Prepared {
    entry: ManifestEntry,
    record: UtteranceRecord,
    origin_s: Option<f64>,
}

fn load_articulatory(
    entry: &ManifestEntry,
    path: &Path,
    corpus: &CorpusConfig,
) -> Result<TrajectorySet> {
    let seq = read_feature_file(path)?;
    let mut unavailable: Vec<String> = entry.unavailable.clone();
    for ex in corpus.exclude.iter().filter(|e| e.speaker == entry.speaker) {
        unavailable.extend(ex.channels.iter().cloned());
    }
    let seq = match &corpus.channels {
        None => seq,
        Some(wanted) => {
            let cols: Vec<Vec<f64>> = wanted
                .iter()
                .map(|n| match seq.channel_index(n) {
                    Some(i) => seq.column(i),
                    None => {
                        unavailable.push(n.clone());
                        vec![0.0; seq.n_frames()]
                    }
                })
                .collect();
            FrameSequence::from_columns(&cols, wanted.clone(), seq.rate_hz())?
        }
    };
    TrajectorySet::with_unavailable(seq, &unavailable)
}

fn prepare(
    manifest: &Manifest,
    entry: &ManifestEntry,
    cfg: &PreprocessConfig,
    warnings: &mut Vec<String>,
    zero_radius: &mut usize,
) -> Result<Prepared> {
    let corpus = cfg.corpus(&entry.corpus)?;
    let acoustic = if let Some(audio) = &entry.audio {
        let path = manifest.resolve(audio);
        let (wave, rate) = read_wav(&path)?;
        Some(mfcc(&wave, rate, &cfg.mfcc)?)
    } else if let Some(rel) = &entry.acoustic {
        Some(read_feature_file(manifest.resolve(rel))?)
    } else {
        None
    };
    let acoustic = match acoustic {
        Some(a) if cfg.mfcc.include_deltas => Some(add_deltas(&a)?),
        other => other,
    };
    if let Some(a) = &acoustic {
        if (a.rate_hz() - cfg.target_rate_hz).abs() > 0.01 * cfg.target_rate_hz {
            warnings.push(format!(
                "{}: acoustic frame rate {} Hz differs from target {} Hz",
                entry.id,
                a.rate_hz(),
                cfg.target_rate_hz
            ));
        }
    }

    let articulatory = match &entry.articulatory {
        Some(rel) => {
            let traj = load_articulatory(entry, &manifest.resolve(rel), corpus)?;
            let traj = presmooth(&traj, corpus.cutoff_hz, cfg.filter_taps)?;
            Some(traj.with_seq(resample(traj.seq(), cfg.target_rate_hz)?)?)
        }
        None => None,
    };

    let record = UtteranceRecord::new(
        entry.id.clone(),
        entry.speaker.clone(),
        entry.corpus.clone(),
        acoustic,
        articulatory,
        entry.intervals.clone(),
    )?;
    let (record, outcome) = trim_silence(&record, &cfg.silence_labels)?;
    let origin_s = match outcome {
        TrimOutcome::NoIntervals => {
            warnings.push(format!("{}: no transcription, silence kept", entry.id));
            None
        }
        TrimOutcome::NoSpeech => {
            warnings.push(format!("{}: transcription has no speech", entry.id));
            None
        }
        TrimOutcome::Trimmed { start_s, .. } => (start_s > 0.0).then_some(start_s),
    };
    let record = match (&record.articulatory, cfg.tract_variables) {
        (Some(t), true) => {
            let (t, diag) = compute_tract_variables(t)?;
            *zero_radius += diag.zero_radius_frames;
            UtteranceRecord {
                articulatory: Some(t),
                ..record
            }
        }
        _ => record,
    };
    Ok(Prepared {
        entry: entry.clone(),
        record,
        origin_s,
    })
}

struct SpeakerOutput {
    entries: Vec<ManifestEntry>,
    stats: SpeakerStats,
    warnings: Vec<String>,
    zero_radius: usize,
}

fn process_speaker(
    manifest: &Manifest,
    speaker: &str,
    entries: &[&ManifestEntry],
    cfg: &PreprocessConfig,
    out_dir: &Path,
) -> Result<SpeakerOutput> {
    let mut warnings = Vec::new();
    let mut zero_radius = 0;
    let prepared = entries
        .iter()
        .map(|e| {
            prepare(manifest, e, cfg, &mut warnings, &mut zero_radius)
                .map_err(|err| err.in_stage(&format!("preprocess {}", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;

    let acoustic_idx: Vec<usize> = (0..prepared.len())
        .filter(|&i| prepared[i].record.acoustic.is_some())
        .collect();
    let mut acoustic_out: BTreeMap<usize, FrameSequence> = BTreeMap::new();
    let mut acoustic_stats = None;
    if !acoustic_idx.is_empty() {
        let seqs: Vec<FrameSequence> = acoustic_idx
            .iter()
            .map(|&i| prepared[i].record.acoustic.clone().unwrap())
            .collect();
        let (normed, stats, diag) = normalize_mfcc(&seqs)?;
        for c in diag.zero_variance {
            warnings.push(format!("speaker {speaker}: acoustic channel {c} has zero variance"));
        }
        for (&i, s) in acoustic_idx.iter().zip(normed) {
            acoustic_out.insert(i, stack_context(&s, cfg.mfcc.context)?);
        }
        acoustic_stats = Some(stats);
    }

    let artic_idx: Vec<usize> = (0..prepared.len())
        .filter(|&i| prepared[i].record.articulatory.is_some())
        .collect();
    let mut artic_out: BTreeMap<usize, TrajectorySet> = BTreeMap::new();
    let mut artic_stats = None;
    if !artic_idx.is_empty() {
        let trajs: Vec<TrajectorySet> = artic_idx
            .iter()
            .map(|&i| prepared[i].record.articulatory.clone().unwrap())
            .collect();
        let (normed, stats, diag) = rolling_normalize(&trajs, cfg.rolling_half_window)?;
        for c in diag.zero_variance {
            warnings.push(format!("speaker {speaker}: articulatory channel {c} has zero variance"));
        }
        for (&i, t) in artic_idx.iter().zip(normed) {
            artic_out.insert(i, t);
        }
        artic_stats = Some(stats);
    }

    let mut out_entries = Vec::with_capacity(prepared.len());
    for (i, p) in prepared.iter().enumerate() {
        let mut e = ManifestEntry::new(&p.entry.id, &p.entry.speaker, &p.entry.corpus);
        if let Some(a) = acoustic_out.get(&i) {
            let rel = format!("acoustic/{}.afv", p.entry.id);
            write_feature_file(a, out_dir.join(&rel))?;
            e.acoustic = Some(rel);
        }
        if let Some(t) = artic_out.get(&i) {
            let rel = format!("articulatory/{}.afv", p.entry.id);
            write_feature_file(t.seq(), out_dir.join(&rel))?;
            e.articulatory = Some(rel);
            e.unavailable = t.unavailable_names();
        }
        e.intervals = p.record.intervals.clone();
        e.origin_s = p.origin_s;
        out_entries.push(e);
    }

    let utterance_ids = artic_idx
        .iter()
        .map(|&i| prepared[i].entry.id.clone())
        .collect::<Vec<_>>();
    let utterance_ids = if utterance_ids.is_empty() {
        prepared.iter().map(|p| p.entry.id.clone()).collect()
    } else {
        utterance_ids
    };
    Ok(SpeakerOutput {
        entries: out_entries,
        stats: SpeakerStats {
            speaker_id: speaker.to_string(),
            utterance_ids,
            acoustic: acoustic_stats,
            articulatory: artic_stats,
        },
        warnings,
        zero_radius,
    })
}

pub fn stats_path(out_dir: &Path, speaker: &str) -> PathBuf {
    out_dir.join("stats").join(format!("{speaker}.json"))
}

/// Preprocesses every utterance of `manifest` into `out_dir`:
///
/// * `out_dir/acoustic/<id>.afv`: speaker-normalized MFCC(+Δ+ΔΔ), context stacked
/// * `out_dir/articulatory/<id>.afv`: smoothed, resampled, trimmed,
///   tract variables added, rolling-normalized trajectories
/// * `out_dir/stats/<speaker>.json`: [`SpeakerStats`]
/// * `out_dir/manifest.jsonl`: the updated manifest, input order preserved
///
/// Speakers are processed in parallel; outputs do not depend on scheduling.
pub fn preprocess_corpus(
    manifest: &Manifest,
    cfg: &PreprocessConfig,
    out_dir: &Path,
) -> Result<PreprocessSummary> {
    cfg.validate()?;
    let groups = manifest.by_speaker();
    let outputs = groups
        .par_iter()
        .map(|(speaker, entries)| process_speaker(manifest, speaker, entries, cfg, out_dir))
        .collect::<Result<Vec<_>>>()?;

    let mut by_id: BTreeMap<&str, &ManifestEntry> = BTreeMap::new();
    let mut summary = PreprocessSummary {
        utterances: manifest.entries.len(),
        speakers: groups.len(),
        ..Default::default()
    };
    for out in &outputs {
        for e in &out.entries {
            by_id.insert(&e.id, e);
        }
        let text = serde_json::to_string_pretty(&out.stats).map_err(|e| Error::Internal(e.to_string()))?;
        let path = stats_path(out_dir, &out.stats.speaker_id);
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        summary.warnings.extend(out.warnings.iter().cloned());
        summary.zero_radius_frames += out.zero_radius;
    }
    let ordered: Vec<ManifestEntry> = manifest
        .entries
        .iter()
        .map(|e| by_id[e.id.as_str()].clone())
        .collect();
    write_entries(&ordered, out_dir.join("manifest.jsonl"))?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    Ok(summary)
}
