//! The declarative pipeline: preprocess, model inference, reconstruction
//! scoring and ABX, driven by one TOML file.
//!
//! ```toml
//! out_dir = "run"                       # relative to this file
//! stages = ["preprocess", "model", "score-recon", "abx"]
//!
//! [preprocess]
//! filter_taps = 50
//! rolling_half_window = 60
//! [[preprocess.corpus]]
//! name = "toy"
//! manifest = "toy/manifest.jsonl"
//! cutoff_hz = 10.0
//!
//! [model]
//! kind = "command"                      # or "noisy-reference"
//! command = ["python", "-m", "inversion.export"]
//!
//! [score]
//! pooling = "frames"
//! exclude_channels = ["Vx", "Vy"]
//!
//! [abx]
//! items = "toy/items.item"
//! features = "predicted"                # acoustic | articulatory | predicted
//! modes = ["within", "across"]
//! min_contexts = 3
//! ```
//!
//! The model contract: the command is run as `<command...> <manifest> <dir>`
//! where `<manifest>` is the preprocessed JSON-lines manifest. It must write
//! `<dir>/<id>.afv` for every utterance with acoustic features, holding the
//! predicted trajectories (canonical channel names, one frame per input frame).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abx::{self, parse_item_file, read_exclusions, AbxConfig, AbxItem, AbxMode, TripletLimits};
use crate::afv::{read_feature_file, write_feature_file};
use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::manifest::Manifest;
use crate::metrics::{score_reconstructions, Pooling, ReconPair, ReconReport};
use crate::preprocess::{preprocess_corpus, stats_path, PreprocessConfig, SpeakerStats};
use crate::report::{config_hash, write_report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Preprocess,
    Model,
    ScoreRecon,
    Abx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// An external program honouring the model contract.
    Command { command: Vec<String> },
    /// Stand-in for a model: the reference trajectories plus seeded Gaussian
    /// noise of the given standard deviation (normalized units).
    NoisyReference {
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_noise() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub pooling: Pooling,
    /// Channels left out of every score, on top of per-utterance availability.
    pub exclude_channels: Vec<String>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            pooling: Pooling::Frames,
            exclude_channels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    Acoustic,
    Articulatory,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbxStageConfig {
    pub items: PathBuf,
    #[serde(default = "default_source")]
    pub features: FeatureSource,
    #[serde(default = "default_modes")]
    pub modes: Vec<AbxMode>,
    #[serde(default = "default_min_contexts")]
    pub min_contexts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_triplets_per_cell: Option<usize>,
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
}

fn default_source() -> FeatureSource {
    FeatureSource::Predicted
}

fn default_modes() -> Vec<AbxMode> {
    vec![AbxMode::Within, AbxMode::Across]
}

fn default_min_contexts() -> usize {
    3
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Stages to run; they always execute in pipeline order.
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub score: Option<ScoreConfig>,
    #[serde(default)]
    pub abx: Option<AbxStageConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// What a pipeline run produced, as paths relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutcome {
    pub reports: Vec<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config("pipeline", e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    fn runs(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }

    fn preprocessed_dir(&self, corpus: &str) -> PathBuf {
        self.out_dir().join("preprocessed").join(corpus)
    }

    fn predictions_dir(&self, corpus: &str) -> PathBuf {
        self.out_dir().join("predictions").join(corpus)
    }

    /// Checks every field and every referenced path before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("stages", "no stage selected"));
        }
        self.preprocess.validate().map_err(|e| match e {
            Error::Config { field, msg } => Error::config(format!("preprocess.{field}"), msg),
            other => other,
        })?;
        if self.preprocess.corpora.is_empty() {
            return Err(Error::config("preprocess.corpus", "at least one corpus is required"));
        }
        let mut names = BTreeSet::new();
        for (i, c) in self.preprocess.corpora.iter().enumerate() {
            if !names.insert(c.name.as_str()) {
                return Err(Error::config(
                    format!("preprocess.corpus[{i}].name"),
                    format!("corpus `{}` configured twice", c.name),
                ));
            }
            let field = format!("preprocess.corpus[{i}].manifest");
            match &c.manifest {
                None if self.runs(Stage::Preprocess) => {
                    return Err(Error::config(field, "required by the preprocess stage"))
                }
                Some(m) if self.runs(Stage::Preprocess) && !self.resolve(m).is_file() => {
                    return Err(Error::config(field, format!("{} does not exist", m.display())))
                }
                _ => {}
            }
            if !self.runs(Stage::Preprocess) && self.stages.iter().any(|s| *s > Stage::Preprocess) {
                let m = self.preprocessed_dir(&c.name).join("manifest.jsonl");
                if !m.is_file() {
                    return Err(Error::config(
                        "stages",
                        format!("corpus `{}` has no preprocessed output; add the preprocess stage", c.name),
                    ));
                }
            }
        }
        if self.runs(Stage::Model) {
            match &self.model {
                None => return Err(Error::config("model", "required by the model stage")),
                Some(ModelConfig::Command { command }) if command.is_empty() => {
                    return Err(Error::config("model.command", "empty command"))
                }
                Some(ModelConfig::NoisyReference { noise, .. }) if !(noise.is_finite() && *noise >= 0.0) => {
                    return Err(Error::config("model.noise", "must be a finite, non-negative number"))
                }
                _ => {}
            }
        }
        let needs_predictions = self.runs(Stage::ScoreRecon)
            || (self.runs(Stage::Abx)
                && self.abx.as_ref().is_some_and(|a| a.features == FeatureSource::Predicted));
        if needs_predictions && !self.runs(Stage::Model) {
            for c in &self.preprocess.corpora {
                if !self.predictions_dir(&c.name).is_dir() {
                    return Err(Error::config(
                        "stages",
                        format!("no predictions for corpus `{}`; add the model stage", c.name),
                    ));
                }
            }
        }
        if self.runs(Stage::Abx) {
            let Some(a) = &self.abx else {
                return Err(Error::config("abx", "required by the abx stage"));
            };
            if !self.resolve(&a.items).is_file() {
                return Err(Error::config("abx.items", format!("{} does not exist", a.items.display())));
            }
            if let Some(ex) = &a.exclusions {
                if !self.resolve(ex).is_file() {
                    return Err(Error::config("abx.exclusions", format!("{} does not exist", ex.display())));
                }
            }
            if a.modes.is_empty() {
                return Err(Error::config("abx.modes", "no mode selected"));
            }
            if a.min_contexts == 0 {
                return Err(Error::config("abx.min_contexts", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Runs the stand-in model over a preprocessed manifest.
pub fn noisy_reference(manifest: &Manifest, out_dir: &Path, noise: f64, seed: u64) -> Result<()> {
    manifest
        .entries
        .par_iter()
        .filter(|e| e.acoustic.is_some())
        .try_for_each(|e| {
            let rel = e.articulatory.as_ref().ok_or_else(|| {
                Error::ExternalModel(format!("noisy-reference needs articulatory data for `{}`", e.id))
            })?;
            let reference = read_feature_file(manifest.resolve(rel))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&e.id));
            let values: Vec<f64> = reference
                .values()
                .iter()
                .map(|v| v + noise * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            write_feature_file(&reference.with_values(values)?, out_dir.join(format!("{}.afv", e.id)))
        })
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn run_model(model: &ModelConfig, manifest_path: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    match model {
        ModelConfig::NoisyReference { noise, seed } => {
            noisy_reference(&Manifest::read(manifest_path)?, out_dir, *noise, *seed)
        }
        ModelConfig::Command { command } => {
            log::info!("running model: {}", command.join(" "));
            let status = std::process::Command::new(&command[0])
                .args(&command[1..])
                .arg(manifest_path)
                .arg(out_dir)
                .status()
                .map_err(|e| Error::ExternalModel(format!("cannot start `{}`: {e}", command[0])))?;
            if !status.success() {
                return Err(Error::ExternalModel(format!("`{}` exited with {status}", command.join(" "))));
            }
            let manifest = Manifest::read(manifest_path)?;
            for e in manifest.entries.iter().filter(|e| e.acoustic.is_some()) {
                let p = out_dir.join(format!("{}.afv", e.id));
                if !p.is_file() {
                    return Err(Error::ExternalModel(format!("no prediction written for `{}`", e.id)));
                }
            }
            Ok(())
        }
    }
}

/// Scores predictions in `pred_dir` (`<id>.afv`) against the articulatory
/// references of a preprocessed corpus. Millimeter RMSE uses the speaker
/// statistics next to the manifest (`stats/<speaker>.json`) when present.
pub fn score_predictions(manifest: &Manifest, pred_dir: &Path, cfg: &ScoreConfig) -> Result<ReconReport> {
    let mut stats: BTreeMap<String, SpeakerStats> = BTreeMap::new();
    for (speaker, _) in manifest.by_speaker() {
        let p = stats_path(&manifest.base_dir, &speaker);
        if p.is_file() {
            stats.insert(speaker, SpeakerStats::read(&p)?);
        }
    }
    let entries: Vec<_> = manifest.entries.iter().filter(|e| e.articulatory.is_some()).collect();
    let loaded = entries
        .par_iter()
        .map(|e| {
            let reference = read_feature_file(manifest.resolve(e.articulatory.as_ref().unwrap()))?;
            let raw = read_feature_file(pred_dir.join(format!("{}.afv", e.id)))?;
            if raw.n_frames() != reference.n_frames() {
                return Err(Error::ShapeMismatch(format!(
                    "prediction for `{}` has {} frames, reference {}",
                    e.id,
                    raw.n_frames(),
                    reference.n_frames()
                )));
            }
            // align prediction channels to the reference; channels the model
            // did not produce are masked
            let mut mask = Vec::with_capacity(reference.n_channels());
            let mut cols = Vec::with_capacity(reference.n_channels());
            for (c, name) in reference.channel_names().iter().enumerate() {
                match raw.channel_index(name) {
                    Some(i) => {
                        cols.push(raw.column(i));
                        mask.push(!e.unavailable.contains(name) && !cfg.exclude_channels.contains(name));
                    }
                    None => {
                        cols.push(reference.column(c));
                        mask.push(false);
                    }
                }
            }
            let pred = FrameSequence::from_columns(&cols, reference.channel_names().to_vec(), reference.rate_hz())?;
            Ok((pred, reference, mask))
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<ReconPair<'_>> = entries
        .iter()
        .zip(loaded)
        .map(|(e, (pred, reference, mask))| {
            let st = stats.get(&e.speaker).and_then(|s| {
                let idx = s.utterance_index(&e.id)?;
                s.articulatory.as_ref().map(|a| (a, idx))
            });
            ReconPair {
                id: e.id.clone(),
                pred,
                reference,
                mask,
                stats: st,
            }
        })
        .collect();
    score_reconstructions(&pairs, cfg.pooling)
}

/// Moves items from source-recording time to the time base of trimmed
/// features using each utterance's `origin_s`.
fn shift_items(items: &[AbxItem], origins: &BTreeMap<String, f64>) -> Vec<AbxItem> {
    items
        .iter()
        .map(|it| match origins.get(&it.file_id) {
            Some(o) => AbxItem {
                onset_s: (it.onset_s - o).max(0.0),
                offset_s: it.offset_s - o,
                ..it.clone()
            },
            None => it.clone(),
        })
        .collect()
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    let out = cfg.out_dir();
    let mut outcome = PipelineOutcome::default();
    let report = |rel: PathBuf, outcome: &mut PipelineOutcome| {
        outcome.reports.push(rel.with_extension("json"));
        outcome.reports.push(rel.with_extension("csv"));
        out.join(rel)
    };

    if cfg.runs(Stage::Preprocess) {
        for c in &cfg.preprocess.corpora {
            let manifest = Manifest::read(cfg.resolve(c.manifest.as_ref().unwrap()))
                .map_err(|e| e.in_stage("preprocess"))?;
            let summary = preprocess_corpus(&manifest, &cfg.preprocess, &cfg.preprocessed_dir(&c.name))
                .map_err(|e| e.in_stage("preprocess"))?;
            log::info!(
                "preprocessed corpus {}: {} utterance(s), {} speaker(s)",
                c.name,
                summary.utterances,
                summary.speakers
            );
            let csv = format!(
                "utterances,speakers,zero_radius_frames,warnings\n{},{},{},{}\n",
                summary.utterances,
                summary.speakers,
                summary.zero_radius_frames,
                summary.warnings.len()
            );
            let stem = report(PathBuf::from(format!("reports/preprocess_{}", c.name)), &mut outcome);
            write_report(&stem, "preprocess", &hash, &summary, &csv)?;
        }
    }

    if cfg.runs(Stage::Model) {
        let model = cfg.model.as_ref().unwrap();
        for c in &cfg.preprocess.corpora {
            run_model(
                model,
                &cfg.preprocessed_dir(&c.name).join("manifest.jsonl"),
                &cfg.predictions_dir(&c.name),
            )
            .map_err(|e| e.in_stage("model"))?;
        }
    }

    if cfg.runs(Stage::ScoreRecon) {
        let score_cfg = cfg.score.clone().unwrap_or_default();
        for c in &cfg.preprocess.corpora {
            let manifest = Manifest::read(cfg.preprocessed_dir(&c.name).join("manifest.jsonl"))
                .map_err(|e| e.in_stage("score-recon"))?;
            let r = score_predictions(&manifest, &cfg.predictions_dir(&c.name), &score_cfg)
                .map_err(|e| e.in_stage("score-recon"))?;
            let stem = report(PathBuf::from(format!("reports/recon_{}", c.name)), &mut outcome);
            write_report(&stem, "score-recon", &hash, &r, &r.to_csv())?;
        }
    }

    if cfg.runs(Stage::Abx) {
        let a = cfg.abx.as_ref().unwrap();
        let stage = |e: Error| e.in_stage("abx");
        let items = parse_item_file(cfg.resolve(&a.items)).map_err(stage)?;
        let exclusions = match &a.exclusions {
            Some(p) => read_exclusions(cfg.resolve(p)).map_err(stage)?,
            None => BTreeSet::new(),
        };
        let wanted: BTreeSet<&str> = items.iter().map(|i| i.file_id.as_str()).collect();
        let mut paths: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut origins: BTreeMap<String, f64> = BTreeMap::new();
        for c in &cfg.preprocess.corpora {
            let dir = cfg.preprocessed_dir(&c.name);
            let manifest = Manifest::read(dir.join("manifest.jsonl")).map_err(stage)?;
            for e in manifest.entries.iter().filter(|e| wanted.contains(e.id.as_str())) {
                let path = match a.features {
                    FeatureSource::Acoustic => e.acoustic.as_ref().map(|r| manifest.resolve(r)),
                    FeatureSource::Articulatory => e.articulatory.as_ref().map(|r| manifest.resolve(r)),
                    FeatureSource::Predicted => Some(cfg.predictions_dir(&c.name).join(format!("{}.afv", e.id))),
                };
                let Some(path) = path else { continue };
                if paths.insert(e.id.clone(), path).is_some() {
                    return Err(stage(Error::config(
                        "preprocess.corpus",
                        format!("utterance id `{}` appears in several corpora", e.id),
                    )));
                }
                if let Some(o) = e.origin_s {
                    origins.insert(e.id.clone(), o);
                }
            }
        }
        if let Some(missing) = wanted.iter().find(|id| !paths.contains_key(**id)) {
            return Err(stage(Error::Bounds(format!(
                "item file refers to `{missing}`, which has no {:?} features",
                a.features
            ))));
        }
        let loaded = paths
            .into_par_iter()
            .map(|(id, p)| read_feature_file(&p).map(|s| (id, s)))
            .collect::<Result<Vec<_>>>()
            .map_err(stage)?;
        let features: BTreeMap<String, FrameSequence> = loaded.into_iter().collect();
        let items = shift_items(&items, &origins);
        for mode in &a.modes {
            let abx_cfg = AbxConfig {
                mode: *mode,
                min_contexts: a.min_contexts,
                limits: TripletLimits {
                    max_triplets_per_cell: a.max_triplets_per_cell,
                    seed: a.seed,
                },
                exclusions: exclusions.clone(),
            };
            let r = abx::evaluate(&items, &features, &abx_cfg).map_err(stage)?;
            log::info!("ABX {mode}: error {:.4} over {} triplet(s)", r.error, r.n_triplets);
            let stem = report(PathBuf::from(format!("reports/abx_{mode}")), &mut outcome);
            write_report(&stem, "abx", &hash, &r, &r.to_csv())?;
        }
    }
    Ok(outcome)
}
